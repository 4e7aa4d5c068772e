"""Degenerate space-time metric, its compatible connections, and curvature.

For a flow metric ``gbar(tau)`` on an n-manifold (tau is log time in the
rescaled picture, ordinary time otherwise) the degenerate contravariant
metric on space-time has ``gt^{jk} = gbar^{jk}`` spatially and zero time
row/column.  The symmetric connections compatible with it are parameterized
by a constant mu, a constant c_term, a (1,1)-tensor field A with
antisymmetric lowered form, and a vector field B:

    Gt^k_ij = Gbar^k_ij
    Gt^k_i0 = -(Rbar_i^k + mu delta_i^k + A_i^k)
    Gt^k_00 = -(1/2 nabla^k Rbar + B^k)
    Gt^0_00 = -(mu + c_term)
    Gt^0_ij = Gt^0_i0 = 0.

Curvature is computed two independent ways: ``curvature_direct`` finite
differences the Christoffel table, ``curvature_closed_form`` assembles the
block formulas (spatial Riemann; antisymmetrized nabla(Rc + A); the
time-time block with the Hessian of R, quadratic Ricci/A terms, nabla B and
the -mu*c_term correction).  Agreement of the two paths is the master test
of the block formulas.

Index conventions: space-time arrays are (n+1)-dimensional with index 0 the
time slot; ``up[a,b,c,d]`` stores R^d_{abc}; lowering follows the degenerate
rule (g_{dl} for d >= 1; the time slot lowered through minus the third slot;
zero when both trailing slots are time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import lambda2
from .conventions import DEEP_STEP_FACTOR
from .fd import DerivativeStencil, UnsupportedOperationError, diff1
from .jets import GeometryJet
from .metrics import ChartPoint, MetricFamily
from .reports import IdentityReport, default_tolerance


class InvariantViolationError(ValueError):
    """Connection input violates a structural invariant (e.g. A not a 2-form)."""


class ScopeError(ValueError):
    """Identity invoked for a connection outside its proven scope."""


# ---------------------------------------------------------------------------


@dataclass
class SpacetimeConnection:
    """Connection data over the degenerate space-time metric.

    ``base`` is the metric family in ordinary time; with ``rescaled`` the
    connection works on gbar(tau) = e^{-tau} g(e^{tau}).  ``a_field`` and
    ``b_field`` are evaluators in ordinary time for the mixed tensor A_i^k
    and the vector B^k (both are insensitive to the rescaling).  ``mu`` may
    be a callable of tau for the single non-constant smoke test.
    """

    base: MetricFamily
    mu: object = 0.0
    c_term: float = 0.0
    a_field: Optional[Callable] = None
    b_field: Optional[Callable] = None
    rescaled: bool = False
    bar: MetricFamily = field(init=False)

    def __post_init__(self):
        self.bar = self.base.rescaled() if self.rescaled else self.base
        self.n = self.base.dimension
        self.N = self.n + 1
        self._jets: dict = {}

    # -- time bookkeeping --------------------------------------------------

    def tau_of(self, t: float) -> float:
        return math.log(t) if self.rescaled else t

    def t_of(self, tau: float) -> float:
        return math.exp(tau) if self.rescaled else tau

    def mu_at(self, tau: float) -> float:
        return float(self.mu(tau)) if callable(self.mu) else float(self.mu)

    def dmu_at(self, tau: float, s: DerivativeStencil) -> float:
        if not callable(self.mu):
            return 0.0
        return float(diff1(lambda z: self.mu(z[0]), np.array([tau]), 0, s.time_step, s.order))

    # -- cached geometry ----------------------------------------------------

    def jet(self, x, tau, order) -> GeometryJet:
        key = (np.asarray(x, dtype=float).tobytes(), float(tau), order)
        J = self._jets.get(key)
        if J is None:
            J = GeometryJet(self.bar, x, tau, order)
            if len(self._jets) > 4096:
                self._jets.clear()
            self._jets[key] = J
        return J

    def a_at(self, x, tau) -> np.ndarray:
        if self.a_field is None:
            return np.zeros((self.n, self.n))
        return np.asarray(self.a_field(np.asarray(x, dtype=float), self.t_of(tau)), dtype=float)

    def b_at(self, x, tau) -> np.ndarray:
        if self.b_field is None:
            return np.zeros(self.n)
        return np.asarray(self.b_field(np.asarray(x, dtype=float), self.t_of(tau)), dtype=float)

    # -- core tables --------------------------------------------------------

    def degenerate_inverse(self, x, tau) -> np.ndarray:
        return lambda2.degenerate_inverse(self.jet(x, tau, 0).ginv)

    def christoffel(self, x, tau, order=3) -> np.ndarray:
        """Gt[c, a, b] = space-time Christoffel Gt^c_{ab}."""
        n, N = self.n, self.N
        J = self.jet(x, tau, order)
        mu = self.mu_at(tau)
        G = np.zeros((N, N, N))
        G[1:, 1:, 1:] = J.gamma
        mixed_ric = J.ricci_mixed  # Rbar_i^k
        A = self.a_at(x, tau)
        col = -(mixed_ric + mu * np.eye(n) + A)  # -(R_i^k + mu d_i^k + A_i^k)
        G[1:, 1:, 0] = col.T  # [k, i] from col[i, k]
        G[1:, 0, 1:] = col.T
        grad_R_up = J.ginv @ J.dscalar  # nabla^k Rbar
        G[1:, 0, 0] = -(0.5 * grad_R_up + self.b_at(x, tau))
        G[0, 0, 0] = -(mu + self.c_term)
        return G

    def check_a_two_form(self, probes) -> None:
        """Gate: the lowered A must be antisymmetric at the probe points."""
        for x, tau in probes:
            J = self.jet(x, tau, 0)
            A = self.a_at(x, tau)
            low = A @ J.g  # Abar_ij = A_i^p gbar_pj
            defect = np.max(np.abs(low + low.T))
            if defect > 1e-8 * max(1.0, np.max(np.abs(low))):
                raise InvariantViolationError(
                    f"lowered A not antisymmetric at {x}, tau={tau}: defect {defect:.2e}"
                )


def build_connection(base, mu=0.0, c_term=0.0, a_field=None, b_field=None,
                     rescaled=False, probes=None) -> SpacetimeConnection:
    """Construct and gate a space-time connection.

    ``probes`` is an iterable of (x, tau) pairs at which the 2-form
    invariant for A is enforced; a small default probe set is used when the
    connection carries an A field and none are given.
    """
    conn = SpacetimeConnection(base, mu, c_term, a_field, b_field, rescaled)
    if a_field is not None:
        if probes is None:
            lo = np.asarray(base.domain.lo) + base.domain.margin + 0.2
            hi = np.asarray(base.domain.hi) - base.domain.margin - 0.2
            t0, t1 = conn.bar.existence_interval
            mid_tau = 0.5 * (max(t0, -2.0) + min(t1, 2.0))
            probes = [(lo + f * (hi - lo), mid_tau) for f in (0.25, 0.5, 0.75)]
        conn.check_a_two_form(probes)
    return conn


# ---------------------------------------------------------------------------
# finite differences in space-time


def st_diff(conn, f, x, tau, dim, s: DerivativeStencil, boost=1.0):
    """d_dim of an evaluator f(x, tau); dim 0 is the time slot."""
    x = np.asarray(x, dtype=float)
    z = np.concatenate([x, [tau]])
    n = conn.n

    def fz(zp):
        return f(zp[:n], zp[n])

    if dim == 0:
        return diff1(fz, z, n, s.time_step * boost, s.order)
    return diff1(fz, z, dim - 1, s.spatial_step * boost, s.order)


def st_covariant_derivative(conn, f, variance, x, tau, s, boost=1.0, gamma=None):
    """nabla_a of a space-time tensor evaluator, one extra leading slot.

    ``variance`` is a string of '+' (contravariant) and '-' (covariant)
    matching the axes of ``f(x, tau)``.
    """
    N = conn.N
    if gamma is None:
        gamma = conn.christoffel(x, tau)
    T0 = np.asarray(f(x, tau), dtype=float)
    out = np.zeros((N,) + T0.shape)
    for a in range(N):
        dT = st_diff(conn, f, x, tau, a, s, boost)
        corr = np.zeros_like(T0)
        for slot, v in enumerate(variance):
            if v == "+":
                # + Gt^b_{am} T^{..m..}
                L = gamma[:, a, :]  # L[b, m] = Gt^b_{am}
                corr += np.tensordot(L, T0, axes=(1, slot)).transpose(
                    lambda2._restore_axes(T0.ndim, slot)
                )
            else:
                # - Gt^m_{a b_slot} T_{..m..}
                L = gamma[:, a, :].T  # L[b, m] = Gt^m_{ab}
                corr -= np.tensordot(L, T0, axes=(1, slot)).transpose(
                    lambda2._restore_axes(T0.ndim, slot)
                )
        out[a] = dT + corr
    return out


def st_second_covariant(conn, f, variance, x, tau, s):
    """nabla_p nabla_q of a tensor evaluator (two extra leading slots).

    The outer derivative uses a boosted step so its cancellation error stays
    below the truncation of the inner one.
    """

    def inner(y, sig):
        return st_covariant_derivative(conn, f, variance, y, sig, s)

    return st_covariant_derivative(
        conn, inner, "-" + variance, x, tau, s, boost=DEEP_STEP_FACTOR
    )


# ---------------------------------------------------------------------------
# curvature


@dataclass
class SpacetimeCurvature:
    """Curvature block data at one point; ``up[a,b,c,d]`` is R^d_{abc}."""

    up: np.ndarray
    low: np.ndarray
    ricci: np.ndarray
    at: ChartPoint


def lower_curvature(up, gbar):
    """Degenerate lowering of R^d_{abc} to R_{abcd}."""
    N = up.shape[0]
    low = np.zeros((N,) * 4)
    low[:, :, :, 1:] = np.einsum("abcm,ml->abcl", up[:, :, :, 1:], gbar)
    # time slot in the last position: R_{abc0} = -gbar_{cp} R^p_{ab0} for c>=1
    low[:, :, 1:, 0] = -np.einsum("abm,mc->abc", up[:, :, 0, 1:], gbar)
    # both trailing slots time: zero (already)
    return low


def curvature_direct(conn, p: ChartPoint, s: DerivativeStencil) -> SpacetimeCurvature:
    """Space-time curvature by finite differences of the Christoffel table.

    R^d_{abc} = d_a Gt^d_{bc} - d_b Gt^d_{ac} + Gt^m_{bc} Gt^d_{am}
                - Gt^m_{ac} Gt^d_{bm}, with d_0 the native time derivative.
    """
    x, tau = p.x, conn.tau_of(p.time)
    N = conn.N
    gam = conn.christoffel(x, tau)
    dgam = np.zeros((N, N, N, N))
    for a in range(N):
        dgam[a] = st_diff(conn, lambda y, sig: conn.christoffel(y, sig), x, tau, a, s)
    up = (
        np.einsum("adbc->abcd", dgam)
        - np.einsum("bdac->abcd", dgam)
        + np.einsum("mbc,dam->abcd", gam, gam)
        - np.einsum("mac,dbm->abcd", gam, gam)
    )
    ric = np.einsum("abca->bc", up)
    return SpacetimeCurvature(up, lower_curvature(up, conn.jet(x, tau, 0).g), ric, p)


def curvature_closed_form(conn, p: ChartPoint, s: DerivativeStencil) -> SpacetimeCurvature:
    """Space-time curvature from the block formulas.

    Spatial block: Riemann of gbar.  Space-time mixed blocks: antisymmetrized
    covariant derivatives of (Rc + A).  Time-time block: time derivative of
    (Rc + A), the Hessian of the scalar curvature, Ricci/A quadratics,
    nabla B, and the -(mu c_term) multiple of the identity.
    """
    x, tau = p.x, conn.tau_of(p.time)
    n, N = conn.n, conn.N
    mu = conn.mu_at(tau)
    J = conn.jet(x, tau, 4)
    up = np.zeros((N,) * 4)

    # spatial block
    up[1:, 1:, 1:, 1:] = J.riemann_up

    nab_rc_mixed = _nabla_ricci_mixed(J)  # nabla_a Rbar_i^l -> [a, i, l]
    nab_a = _nabla_a_mixed(conn, J, x, tau, s)  # nabla_a A_i^l
    sum_mixed = nab_rc_mixed + nab_a

    # R^l_{ij0} = nabla_j(R+A)_i^l - nabla_i(R+A)_j^l
    blk_ij0 = np.einsum("jil->ijl", sum_mixed) - sum_mixed
    up[1:, 1:, 0, 1:] = blk_ij0

    # R^l_{0jk} = nabla^l Rbar_jk - nabla_k Rbar_j^l + nabla_j A_k^l
    nab_rc = J.nabla_ricci  # nabla_a R_ij
    nab_up = np.einsum("ajk,al->jkl", nab_rc, J.ginv)  # nabla^l R_jk
    blk_0jk = nab_up - np.einsum("kjl->jkl", nab_rc_mixed) + np.einsum("jkl->jkl", nab_a)
    up[0, 1:, 1:, 1:] = blk_0jk
    up[1:, 0, 1:, 1:] = -blk_0jk

    # time-time block R^l_{0j0}
    A = conn.a_at(x, tau)
    ric_m = J.ricci_mixed
    dt_sum = _time_derivative_mixed(conn, x, tau, s)  # d_tau (Rbar + A)_j^l
    hessR_up = np.einsum("jb,bl->jl", J.hessian_scalar, J.ginv)  # nabla_j nabla^l R
    nab_b = _nabla_b(conn, J, x, tau, s)  # nabla_j B^l
    C = conn.c_term
    blk = (
        -dt_sum
        + (mu - C) * (ric_m + A)
        + 0.5 * hessR_up
        + ric_m @ ric_m
        + A @ A
        + ric_m @ A
        + A @ ric_m
        + nab_b
        - (mu * C + conn.dmu_at(tau, s)) * np.eye(n)
    )
    up[0, 1:, 0, 1:] = blk
    up[1:, 0, 0, 1:] = -blk

    ricci = np.zeros((N, N))
    ricci[1:, 1:] = J.ricci
    delta_a = _delta_abar(conn, J, x, tau, s)  # (delta Abar)_k = nabla_p A_k^p
    row = 0.5 * J.dscalar - delta_a
    ricci[0, 1:] = row
    ricci[1:, 0] = row
    ricci[0, 0] = (
        0.5 * _dt_scalar(conn, x, tau, s)
        + C * (J.scalar + n * mu)
        + _a_norm2(J, A)
        - _div_b(conn, J, x, tau, s)
        + n * conn.dmu_at(tau, s)
    )
    return SpacetimeCurvature(up, lower_curvature(up, J.g), ricci, p)


# -- helpers for the closed form ----------------------------------------------


def _nabla_ricci_mixed(J):
    # nabla_a R_i^l = g^{lm} nabla_a R_im
    return np.einsum("aim,ml->ail", J.nabla_ricci, J.ginv)


def _nabla_a_mixed(conn, J, x, tau, s):
    """nabla_a A_i^l for the mixed (1,1) field, by FD plus connection terms."""
    n = conn.n
    if conn.a_field is None:
        return np.zeros((n, n, n))
    z = np.concatenate([x, [tau]])
    dA = np.stack(
        [diff1(lambda zp: conn.a_at(zp[:n], zp[n]), z, d, s.spatial_step, s.order) for d in range(n)]
    )
    A = conn.a_at(x, tau)
    G = J.gamma
    return dA + np.einsum("lam,im->ail", G, A) - np.einsum("mai,ml->ail", G, A)


def _nabla_b(conn, J, x, tau, s):
    n = conn.n
    if conn.b_field is None:
        return np.zeros((n, n))
    z = np.concatenate([x, [tau]])
    dB = np.stack(
        [diff1(lambda zp: conn.b_at(zp[:n], zp[n]), z, d, s.spatial_step, s.order) for d in range(n)]
    )
    B = conn.b_at(x, tau)
    return dB + np.einsum("lam,m->al", J.gamma, B)


def _div_b(conn, J, x, tau, s):
    # delta Bbar = -nabla_p B^p
    nb = _nabla_b(conn, J, x, tau, s)
    return float(np.trace(nb))


def _delta_abar(conn, J, x, tau, s):
    # (delta Abar)_k = nabla_p A_k^p
    na = _nabla_a_mixed(conn, J, x, tau, s)
    return np.einsum("aka->k", na)


def _a_norm2(J, A):
    # |Abar|^2 = gbar^{ik} gbar_{ab} A_i^a A_k^b
    return float(np.einsum("ik,ab,ia,kb->", J.ginv, J.g, A, A))


def _time_derivative_mixed(conn, x, tau, s):
    def f(y, sig):
        Jl = conn.jet(y, sig, 2)
        return Jl.ricci_mixed + conn.a_at(y, sig)

    return st_diff(conn, f, x, tau, 0, s)


def _dt_scalar(conn, x, tau, s):
    return float(st_diff(conn, lambda y, sig: conn.jet(y, sig, 2).scalar, x, tau, 0, s))


def atilde_table(conn, x, tau, s) -> np.ndarray:
    """The (1,1) reaction coefficient of the general evolution equation.

    Spatial block A_i^j; time row (B + delta Abar)^j; time-time entry mu.
    """
    n, N = conn.n, conn.N
    J = conn.jet(x, tau, 3)
    At = np.zeros((N, N))
    At[1:, 1:] = conn.a_at(x, tau)
    delta_up = J.ginv @ _delta_abar(conn, J, x, tau, s)
    At[0, 1:] = conn.b_at(x, tau) + delta_up
    At[0, 0] = conn.mu_at(tau)
    return At


# ---------------------------------------------------------------------------
# two-vectors and the quadratic form


@dataclass
class SpacetimeTwoVector:
    """Antisymmetric contravariant 2-tensor with its (U, W) decomposition."""

    components: np.ndarray
    U: np.ndarray
    W: np.ndarray
    w_scale: float

    @classmethod
    def lift(cls, U, W, w_scale):
        """T^{ij} = U^{ij}, T^{0j} = -T^{j0} = w_scale * W^j."""
        U = np.asarray(U, dtype=float)
        W = np.asarray(W, dtype=float)
        n = U.shape[0]
        T = np.zeros((n + 1, n + 1))
        T[1:, 1:] = U
        T[0, 1:] = w_scale * W
        T[1:, 0] = -w_scale * W
        return cls(T, U, W, w_scale)


def quadratic_form(curv: SpacetimeCurvature, S: SpacetimeTwoVector, T: SpacetimeTwoVector) -> float:
    """Rm(S, T) = sum R_{ijkl} S^{ij} T^{lk} (note the lk order)."""
    return float(np.einsum("ijkl,ij,lk->", curv.low, S.components, T.components))


# ---------------------------------------------------------------------------
# residual operations


def compatibility_residual(conn, p: ChartPoint, s: DerivativeStencil) -> float:
    """max |nabla_a gt^{jk}| over all indices."""
    x, tau = p.x, conn.tau_of(p.time)

    def gt(y, sig):
        return conn.degenerate_inverse(y, sig)

    nab = st_covariant_derivative(conn, gt, "++", x, tau, s)
    return float(np.max(np.abs(nab)))


def lifted_covariant_derivative(conn, w_field, p: ChartPoint, s: DerivativeStencil):
    """nabla_a Wt^b for Wt = d_tau + Wbar; w_field(x, tau) -> spatial vector."""
    x, tau = p.x, conn.tau_of(p.time)
    n = conn.n

    def wt(y, sig):
        out = np.zeros(n + 1)
        out[0] = 1.0
        out[1:] = w_field(y, sig)
        return out

    return st_covariant_derivative(conn, wt, "+", x, tau, s)


def lifted_derivative_closed_form(conn, w_field, dw_dtau, p, s):
    """The four closed expressions for nabla Wt, for cross-checking.

    Returns the same (N, N) array as ``lifted_covariant_derivative`` but
    assembled from: nabla_i Wbar^j - (R_i^j + mu d_i^j + A_i^j);
    d_tau Wbar^j - (R+mu+A)(Wbar)^j - 1/2 nabla^j R - B^j; -mu - c_term in
    the time-time slot; zero in the mixed slot.
    """
    x, tau = p.x, conn.tau_of(p.time)
    n = conn.n
    J = conn.jet(x, tau, 3)
    W = np.asarray(w_field(x, tau), dtype=float)
    z = np.concatenate([x, [tau]])
    dW = np.stack(
        [diff1(lambda zp: w_field(zp[:n], zp[n]), z, d, s.spatial_step, s.order) for d in range(n)]
    )
    nabW = dW + np.einsum("jam,m->aj", J.gamma, W)
    mu = conn.mu_at(tau)
    A = conn.a_at(x, tau)
    col = J.ricci_mixed + mu * np.eye(n) + A
    out = np.zeros((n + 1, n + 1))
    out[1:, 1:] = nabW - col  # [i, j] = nabla_i W^j - (R + mu + A)_i^j
    out[0, 1:] = (
        dw_dtau(x, tau)
        - col.T @ W
        - 0.5 * J.ginv @ J.dscalar
        - conn.b_at(x, tau)
    )
    out[0, 0] = -mu - conn.c_term
    return out


def bianchi_residuals(conn, p: ChartPoint, s: DerivativeStencil, curv=None):
    """(first, second) Bianchi residuals of the space-time curvature."""
    x, tau = p.x, conn.tau_of(p.time)
    if curv is None:
        curv = curvature_closed_form(conn, p, s)
    up = curv.up
    b1 = up + np.einsum("bcad->abcd", up) + np.einsum("cabd->abcd", up)
    first = float(np.max(np.abs(b1)))

    def field(y, sig):
        return curvature_closed_form(
            conn, ChartPoint(tuple(y), conn.t_of(sig), p.chart_id), s
        ).up

    nab = st_covariant_derivative(conn, field, "---+", x, tau, s, boost=DEEP_STEP_FACTOR)
    # cyclic sum over (derivative slot, first two curvature slots)
    b2 = nab + np.einsum("ijmkl->mijkl", nab) + np.einsum("jmikl->mijkl", nab)
    second = float(np.max(np.abs(b2)))
    return first, second


def ricci_field(conn, p_chart_id, s):
    def field(y, sig):
        return curvature_closed_form(
            conn, ChartPoint(tuple(y), conn.t_of(sig), p_chart_id), s
        ).ricci

    return field


def ricci_symmetry_residuals(conn, p: ChartPoint, s: DerivativeStencil):
    """Residuals of the two Ricci derivative symmetries.

    First: nabla_i Rc_{j0} - nabla_j Rc_{i0} (minus nabla_0 Abar_ij when an
    A field is present).  Second: nabla_i Rc_{00} - nabla_0 Rc_{i0}
    (stated for A = 0).
    """
    x, tau = p.x, conn.tau_of(p.time)
    nab = st_covariant_derivative(conn, ricci_field(conn, p.chart_id, s), "--", x, tau, s)
    n = conn.n
    r1 = nab[1:, 1:, 0] - np.einsum("ji->ij", nab[1:, 1:, 0])
    if conn.a_field is not None:
        r1 = r1 - _nabla0_abar(conn, p, s)
    res1 = float(np.max(np.abs(r1)))
    r2 = nab[1:, 0, 0] - nab[0, 1:, 0]
    res2 = float(np.max(np.abs(r2)))
    return res1, res2


def _nabla0_abar(conn, p, s):
    """nabla_0 Abar_ij of the spatial 2-form extended by zero."""
    x, tau = p.x, conn.tau_of(p.time)
    N = conn.N

    def field(y, sig):
        Jl = conn.jet(y, sig, 0)
        low = conn.a_at(y, sig) @ Jl.g
        out = np.zeros((N, N))
        out[1:, 1:] = low
        return out

    nab = st_covariant_derivative(conn, field, "--", x, tau, s)
    return nab[0, 1:, 1:]


def divergence_identity_residual(conn, p: ChartPoint, s: DerivativeStencil):
    """max | gt^{pq} nabla_p R^l_{qjk} - R^l_{0jk} | (A = B = 0 scope)."""
    if conn.a_field is not None or conn.b_field is not None:
        raise ScopeError("divergence identity is proven only for A = B = 0")
    x, tau = p.x, conn.tau_of(p.time)

    def field(y, sig):
        return curvature_closed_form(
            conn, ChartPoint(tuple(y), conn.t_of(sig), p.chart_id), s
        ).up

    nab = st_covariant_derivative(conn, field, "---+", x, tau, s, boost=DEEP_STEP_FACTOR)
    gt = conn.degenerate_inverse(x, tau)
    lhs = np.einsum("pq,pqjkl->jkl", gt, nab)
    curv = curvature_closed_form(conn, p, s)
    rhs = curv.up[0]  # R^l_{0jk} -> [j, k, l]
    residual = float(np.max(np.abs(lhs - rhs)))
    # traced form: gt^{jk} of the identity gives Rc_0^l = 1/2 nabla^l R
    J = conn.jet(x, tau, 3)
    traced = np.einsum("jk,jkl->l", gt, lhs)
    defect = max(
        float(np.max(np.abs(traced[1:] - 0.5 * J.ginv @ J.dscalar))),
        float(abs(traced[0])),
    )
    return residual, defect


def degenerate_flow_residual(conn, p: ChartPoint, s: DerivativeStencil):
    """max | d_tau Gt^k_{ij} - gt^{kl} (-nabla_i Rc_jl - nabla_j Rc_il + nabla_l Rc_ij) |.

    Also returns the flow residual of the base metric, which gates the
    meaningfulness of the identity.
    """
    x, tau = p.x, conn.tau_of(p.time)
    dgam = st_diff(conn, lambda y, sig: conn.christoffel(y, sig), x, tau, 0, s)
    nab = st_covariant_derivative(conn, ricci_field(conn, p.chart_id, s), "--", x, tau, s)
    gt = conn.degenerate_inverse(x, tau)
    rhs = np.einsum(
        "kl,ijl->kij",
        gt,
        -np.einsum("ijl->ijl", nab) - np.einsum("jil->ijl", nab) + np.einsum("lij->ijl", nab),
    )
    res = float(np.max(np.abs(dgam - rhs)))
    return res, base_flow_residual(conn, p, s)


def base_flow_residual(conn, p: ChartPoint, s: DerivativeStencil) -> float:
    """max | d_tau gbar_ij + 2 (Rbar_ij + mu gbar_ij) |."""
    x, tau = p.x, conn.tau_of(p.time)
    dt_g = st_diff(conn, lambda y, sig: conn.jet(y, sig, 0).g, x, tau, 0, s)
    J = conn.jet(x, tau, 2)
    return float(np.max(np.abs(dt_g + 2.0 * (J.ricci + conn.mu_at(tau) * J.g))))


def btilde(up, low, gt):
    """B_{abcd} = -gt^{pq} R^m_{pab} R_{cqmd} (quadratic curvature block)."""
    return -np.einsum("pq,pabm,cqmd->abcd", gt, up, low)


def evolution_residual_tensor(conn, p: ChartPoint, s: DerivativeStencil,
                              general=False, use_b_combination=False):
    """Componentwise residual of the curvature evolution equation.

    Basic scope (A = B = 0, c_term = 0):
        nabla_0 Rm = Lap Rm + Rm^2 + Rm^# + 2 mu Rm,
    where Rm^2 + Rm^# may equivalently be written through the quadratic
    blocks as 2(B_{abcd} - B_{bacd} - B_{bcad} + B_{acbd})
    (``use_b_combination``).  General scope (c_term = mu, closed evolving
    A and E) adds the index-substitution action of the reaction table.
    """
    x, tau = p.x, conn.tau_of(p.time)

    def low_field(y, sig):
        return curvature_closed_form(
            conn, ChartPoint(tuple(y), conn.t_of(sig), p.chart_id), s
        ).low

    nab = st_covariant_derivative(conn, low_field, "----", x, tau, s)
    nab0 = nab[0]
    snd = st_second_covariant(conn, low_field, "----", x, tau, s)
    gt = conn.degenerate_inverse(x, tau)
    lap = np.einsum("pq,pqabcd->abcd", gt, snd)
    curv = curvature_closed_form(conn, p, s)
    low = curv.low
    if use_b_combination:
        B = btilde(curv.up, low, gt)
        quad = 2.0 * (
            B
            - np.einsum("bacd->abcd", B)
            - np.einsum("bcad->abcd", B)
            + np.einsum("acbd->abcd", B)
        )
    else:
        quad = lambda2.square(low, gt) + lambda2.sharp(low, low, gt)
    rhs = lap + quad + 2.0 * conn.mu_at(tau) * low
    if general:
        rhs = rhs + lambda2.vee_apply(atilde_table(conn, x, tau, s), low)
    return nab0 - rhs, low


def curvature_evolution_residual(conn, p: ChartPoint, s: DerivativeStencil, general=None):
    """max componentwise residual of the curvature evolution equation."""
    if general is None:
        general = conn.a_field is not None or conn.b_field is not None
    if general and abs(conn.c_term - conn.mu_at(conn.tau_of(p.time))) > 1e-12:
        raise ScopeError("general evolution requires c_term = mu")
    if not general and conn.c_term != 0.0:
        raise ScopeError("basic evolution requires c_term = 0")
    res, low = evolution_residual_tensor(conn, p, s, general=general)
    return float(np.max(np.abs(res))), float(np.max(np.abs(low)))


def two_path_residual(conn, p, s):
    direct = curvature_direct(conn, p, s)
    closed = curvature_closed_form(conn, p, s)
    return float(np.max(np.abs(direct.up - closed.up))), float(np.max(np.abs(closed.up)))


def symmetry_defects(conn, p, s, curv=None):
    """Pair-symmetry defects of the lowered form and the dAbar comparison.

    Returns (max |R_{ij0l} - R_{0lij}|, max |R_{0j0l} - R_{0l0j}|,
    max |defect_{jil} - (dAbar)_{jil}|).
    """
    x, tau = p.x, conn.tau_of(p.time)
    if curv is None:
        curv = curvature_closed_form(conn, p, s)
    low = curv.low
    d1 = low[1:, 1:, 0, 1:] - np.einsum("lij->ijl", low[0, 1:, 1:, 1:])
    d2 = low[0, 1:, 0, 1:] - low[0, 1:, 0, 1:].T
    da = _d_abar(conn, p, s)
    # defect_{ijl} = R_{ij0l} - R_{0lij} should equal (dAbar)_{jil}
    match = d1 - np.einsum("jil->ijl", da)
    return (
        float(np.max(np.abs(d1))),
        float(np.max(np.abs(d2))),
        float(np.max(np.abs(match))),
    )


def _d_abar(conn, p, s):
    """(dAbar)_{aij} = nabla_a Abar_ij + nabla_i Abar_ja + nabla_j Abar_ai."""
    x, tau = p.x, conn.tau_of(p.time)
    n = conn.n
    J = conn.jet(x, tau, 2)

    def low_a(y, sig):
        return conn.a_at(y, sig) @ conn.jet(y, sig, 0).g

    z = np.concatenate([x, [tau]])
    dA = np.stack(
        [diff1(lambda zp: low_a(zp[:n], zp[n]), z, d, s.spatial_step, s.order) for d in range(n)]
    )
    A = low_a(x, tau)
    G = J.gamma
    nab = dA - np.einsum("mai,mj->aij", G, A) - np.einsum("maj,im->aij", G, A)
    return nab + np.einsum("ija->aij", nab) + np.einsum("jai->aij", nab)
