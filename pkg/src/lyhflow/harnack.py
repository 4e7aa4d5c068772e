"""Curvature quadratics and their positivity monitoring.

Implements the expanding-soliton quadratic Z (coefficient tensors M, P), the
general linear-type quadratics

    Psi(A,E,U,W) = R_{ijkl} U^{ij} U^{lk} + 2 W^j nab_j A_{kl} U^{lk}
                   + (g^{pq} A_{jp} A_{lq} - nab_j E_l) W^j W^l
    psi(A,E,V)   = Rc(V,V) - 2 (delta A)(V) + |A|^2 + delta E,

the full space-time quadratic Phi (polynomial in t, equal to
e^{tbar} Rm~(X,X) for the connection with B = E - 2t delta A and C = 1/2),
their Kaehler and surface specializations, frame-derivative operators, and
minimum-eigenvalue extraction over the argument space of 2-forms plus
1-forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import spacetime as st
from .conventions import DEEP_STEP_FACTOR
from .fd import DerivativeStencil, UnsupportedOperationError, diff1
from .jets import GeometryJet, orthonormal_frame, two_form_norm2
from .lambda2 import ordered_pairs, vee_apply
from .metrics import ChartPoint, MetricFamily


# ---------------------------------------------------------------------------
# scalar fields and form pairs


@dataclass
class ScalarField:
    """A scalar with optional analytic gradient / covariant Hessian access."""

    value: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None  # covariant nabla nabla

    def v(self, x, t) -> float:
        return float(self.value(np.asarray(x, dtype=float), float(t)))

    def g(self, x, t, metric, s) -> np.ndarray:
        if self.grad is not None:
            return np.asarray(self.grad(np.asarray(x, dtype=float), float(t)), dtype=float)
        n = metric.dimension
        z = np.asarray(x, dtype=float)
        return np.array(
            [diff1(lambda y: self.value(y, t), z, d, s.spatial_step, s.order) for d in range(n)]
        )

    def h(self, x, t, metric, s) -> np.ndarray:
        if self.hess is not None:
            return np.asarray(self.hess(np.asarray(x, dtype=float), float(t)), dtype=float)
        n = metric.dimension
        z = np.asarray(x, dtype=float)
        dgrad = np.stack(
            [
                diff1(lambda y: self.g(y, t, metric, s), z, d,
                      s.spatial_step * DEEP_STEP_FACTOR, s.order)
                for d in range(n)
            ]
        )
        J = GeometryJet(metric, x, t, 1)
        return dgrad - np.einsum("mab,m->ab", J.gamma, self.g(x, t, metric, s))

    def lap(self, x, t, metric, s) -> float:
        J = GeometryJet(metric, x, t, 1)
        return float(np.einsum("ab,ab->", J.ginv, self.h(x, t, metric, s)))

    def dt(self, x, t, s) -> float:
        z = np.array([t])
        return float(diff1(lambda zz: self.v(x, zz[0]), z, 0, s.time_step, s.order))


def closed_form_phi_f(metric: MetricFamily):
    """The pair phi = t R + 1, f = t^2 R + t on a flow solution."""

    def mk(scale_pow, shift):
        def value(x, t):
            return t**scale_pow * GeometryJet(metric, x, t, 2).scalar + shift(t)

        def grad(x, t):
            return t**scale_pow * GeometryJet(metric, x, t, 3).dscalar

        def hess(x, t):
            return t**scale_pow * GeometryJet(metric, x, t, 4).hessian_scalar

        return ScalarField(value, grad, hess)

    return mk(1, lambda t: 1.0), mk(2, lambda t: t)


@dataclass
class FormPair:
    """A 2-form A(t) and 1-form E(t) with derivative access.

    ``a_form``/``e_form`` return covariant components; ``nabla_a``/``nabla_e``
    (optional) return the covariant derivatives nab_a A_ij and nab_a E_i.
    The surface provenance carries its generating scalars.
    """

    a_form: Callable
    e_form: Callable
    provenance: str = "general"
    nabla_a: Optional[Callable] = None
    nabla_e: Optional[Callable] = None
    phi: Optional[ScalarField] = None
    f: Optional[ScalarField] = None

    def A(self, x, t, n) -> np.ndarray:
        if self.a_form is None:
            return np.zeros((n, n))
        return np.asarray(self.a_form(np.asarray(x, dtype=float), float(t)), dtype=float)

    def E(self, x, t, n) -> np.ndarray:
        if self.e_form is None:
            return np.zeros(n)
        return np.asarray(self.e_form(np.asarray(x, dtype=float), float(t)), dtype=float)

    def nab_A(self, metric, x, t, s) -> np.ndarray:
        n = metric.dimension
        if self.a_form is None:
            return np.zeros((n, n, n))
        if self.nabla_a is not None:
            return np.asarray(self.nabla_a(np.asarray(x, dtype=float), float(t)), dtype=float)
        z = np.asarray(x, dtype=float)
        dA = np.stack(
            [diff1(lambda y: self.A(y, t, n), z, d, s.spatial_step, s.order) for d in range(n)]
        )
        J = GeometryJet(metric, x, t, 1)
        A = self.A(x, t, n)
        return (
            dA
            - np.einsum("mai,mj->aij", J.gamma, A)
            - np.einsum("maj,im->aij", J.gamma, A)
        )

    def nab_E(self, metric, x, t, s) -> np.ndarray:
        n = metric.dimension
        if self.e_form is None:
            return np.zeros((n, n))
        if self.nabla_e is not None:
            return np.asarray(self.nabla_e(np.asarray(x, dtype=float), float(t)), dtype=float)
        z = np.asarray(x, dtype=float)
        dE = np.stack(
            [diff1(lambda y: self.E(y, t, n), z, d, s.spatial_step, s.order) for d in range(n)]
        )
        J = GeometryJet(metric, x, t, 1)
        return dE - np.einsum("mai,m->ai", J.gamma, self.E(x, t, n))

    def delta_A(self, metric, x, t, s) -> np.ndarray:
        """(delta A)_i = -nab^p A_{pi}."""
        J = GeometryJet(metric, x, t, 1)
        return -np.einsum("ap,api->i", J.ginv, self.nab_A(metric, x, t, s))

    def delta_E(self, metric, x, t, s) -> float:
        J = GeometryJet(metric, x, t, 1)
        return -float(np.einsum("ap,ap->", J.ginv, self.nab_E(metric, x, t, s)))

    def norm_A2(self, metric, x, t) -> float:
        J = GeometryJet(metric, x, t, 0)
        A = self.A(x, t, metric.dimension)
        return float(np.einsum("ip,jq,ij,pq->", J.ginv, J.ginv, A, A))

    def d_A(self, metric, x, t, s) -> np.ndarray:
        """(dA)_{aij} cyclic; zero identically on surfaces for top forms."""
        nab = self.nab_A(metric, x, t, s)
        return nab + np.einsum("ija->aij", nab) + np.einsum("jai->aij", nab)

    def d_E(self, metric, x, t, s) -> np.ndarray:
        nab = self.nab_E(metric, x, t, s)
        return nab - np.einsum("ia->ai", nab)

    # -- bridges to the space-time connection --------------------------------

    def connection_fields(self, metric: MetricFamily, rescaled: bool, s: DerivativeStencil):
        """(a_field, b_field) in ordinary time for the space-time connection.

        The mixed tensor A_i^k and the vector B^k are insensitive to the log
        rescale; B = E - 2 w(t) delta A with w = t in the rescaled picture
        and w = 1 otherwise.
        """

        def a_field(x, t):
            J = GeometryJet(metric, x, t, 0)
            return self.A(x, t, metric.dimension) @ J.ginv

        def b_field(x, t):
            J = GeometryJet(metric, x, t, 0)
            w = t if rescaled else 1.0
            B_low = self.E(x, t, metric.dimension) - 2.0 * w * self.delta_A(metric, x, t, s)
            return J.ginv @ B_low

        return (a_field if self.a_form is not None else None), b_field


def kaehler_pair(metric: MetricFamily, orientation: int = 1) -> FormPair:
    """A = t rho + omega/2, E = -(t^2/2) dR on a Kaehler (surface) solution."""

    def rot(x, t):
        J = GeometryJet(metric, x, t, 0)
        root = math.sqrt(float(np.linalg.det(J.g)))
        eps = np.array([[0.0, 1.0], [-1.0, 0.0]]) * orientation
        return (root * eps) @ J.ginv, J

    def a_form(x, t):
        Jrot, J = rot(x, t)
        J2 = GeometryJet(metric, x, t, 2)
        return t * (Jrot @ J2.ricci) + 0.5 * (Jrot @ J.g)

    def e_form(x, t):
        return -0.5 * t**2 * GeometryJet(metric, x, t, 3).dscalar

    def nabla_a(x, t):
        Jrot, _ = rot(x, t)
        nab_rc = GeometryJet(metric, x, t, 3).nabla_ricci
        return t * np.einsum("ik,akj->aij", Jrot, nab_rc)

    def nabla_e(x, t):
        return -0.5 * t**2 * GeometryJet(metric, x, t, 4).hessian_scalar

    return FormPair(a_form, e_form, "kaehler_full", nabla_a, nabla_e)


def surface_pair(phi: ScalarField, f: ScalarField, metric: MetricFamily,
                 s: DerivativeStencil, orientation: int = 1) -> FormPair:
    """A = phi dS and E = -2 df on a surface solution."""

    def area(x, t):
        J = GeometryJet(metric, x, t, 0)
        root = math.sqrt(float(np.linalg.det(J.g)))
        return root * np.array([[0.0, 1.0], [-1.0, 0.0]]) * orientation

    def a_form(x, t):
        return phi.v(x, t) * area(x, t)

    def e_form(x, t):
        return -2.0 * phi_grad(f, x, t)

    def phi_grad(fld, x, t):
        return fld.g(x, t, metric, s)

    def nabla_a(x, t):
        dS = area(x, t)
        gphi = phi.g(x, t, metric, s)
        return np.einsum("a,ij->aij", gphi, dS)

    def nabla_e(x, t):
        return -2.0 * f.h(x, t, metric, s)

    return FormPair(a_form, e_form, "surface_phi_f", nabla_a, nabla_e, phi=phi, f=f)


def zero_a_pair(f: ScalarField, metric: MetricFamily, s: DerivativeStencil) -> FormPair:
    """A = 0 and E = -df for a solution f of the scalar heat equation."""

    def e_form(x, t):
        return -f.g(x, t, metric, s)

    def nabla_e(x, t):
        return -f.h(x, t, metric, s)

    return FormPair(None, e_form, "zero_A", None, nabla_e, f=f)


# ---------------------------------------------------------------------------
# the quadratics


def psi_matrix(pair: FormPair, metric, p: ChartPoint, s, U, W) -> float:
    """Psi = Rm(U,U) + 2 W^j nab_j A_{kl} U^{lk} + (A(W)^2 - nab E)(W,W)."""
    x, t = p.x, p.time
    n = metric.dimension
    J = GeometryJet(metric, x, t, 2)
    nabA = pair.nab_A(metric, x, t, s)
    nabE = pair.nab_E(metric, x, t, s)
    A = pair.A(x, t, n)
    out = float(np.einsum("ijkl,ij,lk->", J.riemann_low, U, U))
    out += 2.0 * float(np.einsum("j,jkl,lk->", W, nabA, U))
    out += float(np.einsum("pq,jp,lq,j,l->", J.ginv, A, A, W, W))
    out -= float(np.einsum("jl,j,l->", nabE, W, W))
    return out


def psi_trace(pair: FormPair, metric, p: ChartPoint, s, V) -> float:
    """psi = Rc(V,V) - 2 (delta A)(V) + |A|^2 + delta E."""
    x, t = p.x, p.time
    J = GeometryJet(metric, x, t, 2)
    out = float(np.einsum("ij,i,j->", J.ricci, V, V))
    out -= 2.0 * float(pair.delta_A(metric, x, t, s) @ V)
    out += pair.norm_A2(metric, x, t)
    out += pair.delta_E(metric, x, t, s)
    return out


def psi_trace_from_matrix(pair, metric, p, s, V) -> float:
    """Orthonormal-frame trace of Psi at U = (V ^ e_k)/2, summed over k."""
    J = GeometryJet(metric, p.x, p.time, 0)
    frame = orthonormal_frame(J.g)
    total = 0.0
    for k in range(metric.dimension):
        e = frame[:, k]
        U = 0.5 * (np.outer(V, e) - np.outer(e, V))
        total += psi_matrix(pair, metric, p, s, U, e)
    return total


def nabla_delta_a(pair, metric, x, t, s) -> np.ndarray:
    """nab_j (delta A)_l for the 1-form delta A."""
    n = metric.dimension
    z = np.asarray(x, dtype=float)
    dd = np.stack(
        [
            diff1(lambda y: pair.delta_A(metric, y, t, s), z, d,
                  s.spatial_step * DEEP_STEP_FACTOR, s.order)
            for d in range(n)
        ]
    )
    J = GeometryJet(metric, x, t, 1)
    return dd - np.einsum("mjl,m->jl", J.gamma, pair.delta_A(metric, x, t, s))


def phi_full(pair: FormPair, metric, p: ChartPoint, s, U, W) -> float:
    """The full space-time quadratic, polynomial in t (mu = 1/2).

    Equals e^{tbar} Rm~(X,X) for the connection with B = E - 2t delta A and
    C = 1/2; evaluable from t = 0.
    """
    x, t = p.x, p.time
    mu = 0.5
    n = metric.dimension
    J = GeometryJet(metric, x, t, 4)
    nabA = pair.nab_A(metric, x, t, s)
    nabE = pair.nab_E(metric, x, t, s)
    A = pair.A(x, t, n)
    A_mixed = A @ J.ginv  # A_j^p
    ric = J.ricci
    ric_up = J.ginv @ ric @ J.ginv
    out = float(np.einsum("ijkl,ij,lk->", J.riemann_low, U, U))
    # cross block: t P_{lkj} + nab_j A_{kl}
    P = J.p_tensor  # P_{ijk} = nab_i R_jk - nab_j R_ik
    cross = t * np.einsum("lkj->jkl", P) + nabA
    out += 2.0 * float(np.einsum("j,jkl,lk->", W, cross, U))
    # WW block
    mat = t * t * (
        J.laplacian_ricci
        - 0.5 * J.hessian_scalar
        + 2.0 * np.einsum("jpql,pq->jl", J.riemann_low, ric_up)
        - np.einsum("jp,pl->jl", J.ricci_mixed, ric)
    )
    mat += t * (
        2.0 * mu * ric
        + A_mixed @ ric
        + (A_mixed @ ric).T
        + 2.0 * nabla_delta_a(pair, metric, x, t, s)
    )
    mat += mu * mu * J.g - np.einsum("jp,pl->jl", A_mixed, A) - nabE
    out += float(np.einsum("jl,j,l->", mat, W, W))
    return out


def phi_full_spacetime(pair: FormPair, metric, p: ChartPoint, s, U, W) -> float:
    """Cross-path evaluation of the full quadratic through the space-time
    curvature of the connection with B = E - 2t delta A, C = mu = 1/2."""
    a_field, b_field = pair.connection_fields(metric, rescaled=True, s=s)
    conn = st.SpacetimeConnection(metric, 0.5, 0.5, a_field, b_field, rescaled=True)
    curv = st.curvature_closed_form(conn, p, s)
    X = st.SpacetimeTwoVector.lift(U, W, 0.5)
    return p.time * st.quadratic_form(curv, X, X)


# ---------------------------------------------------------------------------
# Hamilton's quadratic


def hamilton_MP(metric, p: ChartPoint, s, include_expansion=True):
    """Coefficient tensors M_ij and P_ijk of the expanding-soliton quadratic.

    ``include_expansion=False`` drops the 1/(2t) R_ij term (the eternal /
    steady-soliton variant).
    """
    t = p.time
    if include_expansion and t <= 0:
        raise ValueError("the expansion term requires t > 0")
    J = GeometryJet(metric, p.x, t, 4)
    ric_up = J.ginv @ J.ricci @ J.ginv
    M = (
        J.laplacian_ricci
        - 0.5 * J.hessian_scalar
        + 2.0 * np.einsum("ipqj,pq->ij", J.riemann_low, ric_up)
        - np.einsum("ip,pj->ij", J.ricci_mixed, J.ricci)
    )
    if include_expansion:
        M = M + J.ricci / (2.0 * t)
    return M, J.p_tensor


def hamilton_MPZ(metric, p: ChartPoint, s, U, W, include_expansion=True):
    """(M, P, Z) with Z = M(W,W) + 2 P(U, W) + Rm(U, U)."""
    M, P = hamilton_MP(metric, p, s, include_expansion)
    J = GeometryJet(metric, p.x, p.time, 2)
    Z = float(
        np.einsum("ij,i,j->", M, W, W)
        + 2.0 * np.einsum("ijk,ij,k->", P, U, W)
        + np.einsum("ijkl,ij,lk->", J.riemann_low, U, U)
    )
    return M, P, Z


# ---------------------------------------------------------------------------
# frame operators


def vee_action(a, b, T) -> np.ndarray:
    """The index-substitution vector field on covariant tensors:
    (v^a_b T)_{cd..z} = delta^a_c T_{bd..z} + ... + delta^a_z T_{cd..b}."""
    if T.ndim > 4:
        raise UnsupportedOperationError("vee action implemented for rank <= 4")
    out = np.zeros_like(T)
    for slot in range(T.ndim):
        idx = [slice(None)] * T.ndim
        idx[slot] = a
        src = [slice(None)] * T.ndim
        src[slot] = b
        out[tuple(idx)] += T[tuple(src)]
    return out


def material_time_derivative(field, metric, p: ChartPoint, s) -> np.ndarray:
    """D_t T = d_t T + Rc-substitution, the frame-preserving time derivative
    along the flow (vanishes on the metric itself)."""
    x, t = p.x, p.time
    z = np.array([t])
    dT = diff1(lambda zz: np.asarray(field(x, zz[0]), dtype=float), z, 0, s.time_step, s.order)
    J = GeometryJet(metric, x, t, 2)
    T0 = np.asarray(field(x, t), dtype=float)
    if T0.ndim == 0:
        return dT
    return dT + vee_apply(J.ricci_mixed, T0)


def spatial_laplacian(field, metric, x, t, s) -> np.ndarray:
    """Rough Laplacian of a covariant tensor field, exact-jet Christoffels."""
    n = metric.dimension

    def nab(y, tt):
        z = np.asarray(y, dtype=float)
        G = GeometryJet(metric, z, tt, 1).gamma
        T0 = np.asarray(field(z, tt), dtype=float)
        out = np.zeros((n,) + T0.shape)
        for a in range(n):
            dT = diff1(lambda w: np.asarray(field(w, tt), dtype=float), z, a,
                       s.spatial_step, s.order)
            corr = np.zeros_like(T0)
            for slot in range(T0.ndim):
                L = G[:, a, :].T
                corr -= np.tensordot(L, T0, axes=(1, slot)).transpose(
                    _axes_back(T0.ndim, slot)
                )
            out[a] = dT + corr
        return out

    z = np.asarray(x, dtype=float)
    G = GeometryJet(metric, z, t, 1).gamma
    T1 = nab(z, t)
    snd = np.zeros((n,) + T1.shape)
    for a in range(n):
        dT = diff1(lambda w: nab(w, t), z, a, s.spatial_step * DEEP_STEP_FACTOR, s.order)
        corr = np.zeros_like(T1)
        for slot in range(T1.ndim):
            L = G[:, a, :].T
            corr -= np.tensordot(L, T1, axes=(1, slot)).transpose(
                _axes_back(T1.ndim, slot)
            )
        snd[a] = dT + corr
    ginv = GeometryJet(metric, z, t, 0).ginv
    return np.einsum("pq,pq...->...", ginv, snd)


def _axes_back(rank, slot):
    axes = list(range(1, rank))
    axes.insert(slot, 0)
    return axes


# ---------------------------------------------------------------------------
# evolution system of (Rm, P, M) along the flow


def hamilton_evolution_residuals(metric, p: ChartPoint, s):
    """Componentwise residuals of the coupled evolution equations for the
    lowered curvature, the tensor P, and the tensor M along the flow.

    Returns a dict with residual arrays 'R', 'P', 'M' (all in the package
    curvature convention) plus the values of (Rm, P, M) at the point.
    """
    x, t = p.x, p.time
    if t <= 0:
        raise ValueError("requires t > 0")
    J = GeometryJet(metric, x, t, 4)
    g, ginv = J.g, J.ginv
    ric, ricm = J.ricci, J.ricci_mixed
    ric_up = ginv @ ric @ ginv
    Rlow = J.riemann_low
    Rup = J.riemann_up
    P = J.p_tensor
    M, _ = hamilton_MP(metric, p, s, include_expansion=True)

    def rlow_field(y, tt):
        return GeometryJet(metric, y, tt, 2).riemann_low

    def p_field(y, tt):
        return GeometryJet(metric, y, tt, 3).p_tensor

    def m_field(y, tt):
        Jf = GeometryJet(metric, y, tt, 4)
        ru = Jf.ginv @ Jf.ricci @ Jf.ginv
        return (
            Jf.laplacian_ricci
            - 0.5 * Jf.hessian_scalar
            + 2.0 * np.einsum("ipqj,pq->ij", Jf.riemann_low, ru)
            - np.einsum("ip,pj->ij", Jf.ricci_mixed, Jf.ricci)
            + Jf.ricci / (2.0 * tt)
        )

    def m_dt(y, tt):
        # the 1/(2 tt) term is stiff near t = 0; difference tt * M instead,
        # which is smooth, and recover d_t M = (d_t(t M) - M) / t
        z = np.array([tt])
        d_tm = diff1(lambda zz: zz[0] * m_field(y, zz[0]), z, 0, s.time_step, s.order)
        return (d_tm - m_field(y, tt)) / tt

    # curvature equation
    B = -np.einsum("pq,pijm,kqml->ijkl", ginv, Rup, Rlow)
    quad_R = 2.0 * (
        B
        - np.einsum("jikl->ijkl", B)
        - np.einsum("jkil->ijkl", B)
        + np.einsum("ikjl->ijkl", B)
    )
    res_R = (
        material_time_derivative(rlow_field, metric, p, s)
        - spatial_laplacian(rlow_field, metric, x, t, s)
        - quad_R
    )

    # P equation
    nabRm = J.nabla_riemann_up
    rhs_P = 2.0 * np.einsum("pq,qijkp->ijk", ricm, nabRm)
    rhs_P += 2.0 * np.einsum(
        "pq,pijr,qrk->ijk", ginv, Rup, P
    )
    rhs_P -= 2.0 * np.einsum("pq,pjkr,qir->ijk", ginv, Rup, P)
    rhs_P += 2.0 * np.einsum("pq,pikr,qjr->ijk", ginv, Rup, P)
    res_P = (
        material_time_derivative(p_field, metric, p, s)
        - spatial_laplacian(p_field, metric, x, t, s)
        - rhs_P
    )

    # M equation
    nabP = J.nabla_p  # nab_a P_{ijk}
    rhs_M = 2.0 * np.einsum("pq,pqil->il", ric_up, nabP + np.einsum("pqli->pqil", nabP))
    rhs_M += 2.0 * np.einsum("mp,mq,ipql->il", ricm, ric_up, Rlow)
    rhs_M += 2.0 * np.einsum("pq,rs,iprl,qs->il", ginv, ginv, Rlow, M)
    rhs_M -= 2.0 * np.einsum(
        "pq,rs,ipr,lsq->il", ginv, ginv, P, 2.0 * P + np.einsum("qls->lsq", P)
    )
    rhs_M -= ric / (2.0 * t * t)
    DtM = m_dt(x, t) + vee_apply(J.ricci_mixed, M)
    res_M = DtM - spatial_laplacian(m_field, metric, x, t, s) - rhs_M

    return {
        "R": res_R,
        "P": res_P,
        "M": res_M,
        "Rm": Rlow,
        "Ptensor": P,
        "Mtensor": M,
    }


def rpm_dictionary_defects(metric, p: ChartPoint, s):
    """Space-time translation of (Rm, P, M) for the log-rescaled picture.

    Returns max defects of: R_{ijkl} = t Rt_{ijkl}, P_{lkj} = Rt_{0jkl},
    M_{il} = (1/t) Rt_{i00l}, plus the four quadratic-block identities.
    """
    t = p.time
    conn = st.SpacetimeConnection(metric, mu=0.5, rescaled=True)
    curv = st.curvature_closed_form(conn, p, s)
    low = curv.low
    J = GeometryJet(metric, p.x, t, 4)
    P = J.p_tensor
    M, _ = hamilton_MP(metric, p, s, include_expansion=True)
    d_rm = np.max(np.abs(J.riemann_low - t * low[1:, 1:, 1:, 1:]))
    d_p = np.max(np.abs(np.einsum("lkj->jkl", P) - np.einsum("jkl->jkl", low[0, 1:, 1:, 1:])))
    d_m = np.max(np.abs(M - low[1:, 0, 0, 1:] / t))

    gt = conn.degenerate_inverse(p.x, conn.tau_of(t))
    Bt = st.btilde(curv.up, low, gt)
    g, ginv = J.g, J.ginv
    Rup = J.riemann_up
    b1 = Bt[1:, 1:, 1:, 0] - t * np.einsum("pq,pijr,qkr->ijk", ginv, Rup, P)
    b2 = Bt[1:, 0, 0, 1:] + t * t * np.einsum(
        "pq,rs,ipr,lsq->il", ginv, ginv, P, P
    )
    b3 = Bt[1:, 0, 1:, 0] - t * t * np.einsum(
        "pq,rs,ipr,qls->il", ginv, ginv, P, P
    )
    b4 = Bt[1:, 1:, 0, 0] + t * t * np.einsum("pq,pilr,qr->il", ginv, Rup, M)
    return {
        "rm": float(d_rm),
        "p": float(d_p),
        "m": float(d_m),
        "b_idents": float(max(np.max(np.abs(b)) for b in (b1, b2, b3, b4))),
    }


def equivalence_defects(metric, p: ChartPoint, s):
    """Componentwise agreement of the space-time evolution residual with the
    (Rm, P, M) residual system through the curvature dictionary.

    The spatial block of the space-time residual equals the curvature
    residual; the single-time block equals t times the P residual; the
    double-time block equals t^2 times the M residual.
    """
    t = p.time
    conn = st.SpacetimeConnection(metric, mu=0.5, rescaled=True)
    res_st, _ = st.evolution_residual_tensor(conn, p, s, general=False, use_b_combination=True)
    ham = hamilton_evolution_residuals(metric, p, s)
    d_spatial = np.max(np.abs(res_st[1:, 1:, 1:, 1:] - ham["R"]))
    d_p = np.max(np.abs(res_st[1:, 1:, 1:, 0] - t * ham["P"]))
    d_m = np.max(np.abs(res_st[1:, 0, 0, 1:] - t * t * ham["M"]))
    return {
        "spatial": float(d_spatial),
        "p_block": float(d_p),
        "m_block": float(d_m),
        "st_max": float(np.max(np.abs(res_st))),
        "ham_max": float(max(np.max(np.abs(ham[k])) for k in ("R", "P", "M"))),
    }


# ---------------------------------------------------------------------------
# the pointwise assumption system and its space-time translation


@dataclass
class AssumptionPointData:
    """Frame values at one point entering the evolution of the quadratic.

    All arrays are components in a g-orthonormal frame: the Ricci matrix, a
    2-form U and 1-form W, their frame derivatives DW[a,b] = D_a W_b and
    DU[a,b,c] = D_a U_{bc}, heat-operator values, and the time t > 0.
    """

    t: float
    ricci: np.ndarray
    U: np.ndarray
    W: np.ndarray
    DW: np.ndarray
    DU: np.ndarray
    DtW: np.ndarray
    DtU: np.ndarray
    LapW: np.ndarray
    LapU: np.ndarray


def assumption_residuals(pd: AssumptionPointData):
    """Residuals of the four pointwise assumptions."""
    n = pd.W.shape[0]
    t, R = pd.t, pd.ricci
    eye = np.eye(n)
    rA1 = pd.DtW - pd.LapW - pd.W / t
    rA2 = pd.DtU - pd.LapU
    rA3 = pd.DW.copy()
    rhs4 = 0.5 * (np.einsum("ab,c->abc", R, pd.W) - np.einsum("ac,b->abc", R, pd.W))
    rhs4 += (1.0 / (4.0 * t)) * (
        np.einsum("ab,c->abc", eye, pd.W) - np.einsum("ac,b->abc", eye, pd.W)
    )
    rA4 = pd.DU - rhs4
    return rA1, rA2, rA3, rA4


def spacetime_residuals(pd: AssumptionPointData):
    """Residuals of (heat operator of the lifted 2-vector, its space-like
    covariant derivative), expressed through the same point data."""
    n = pd.W.shape[0]
    t, R = pd.t, pd.ricci
    eye = np.eye(n)
    cov_sp = (
        pd.DU
        - np.einsum("ki,j->kij", 0.5 * R + eye / (4.0 * t), pd.W)
        + np.einsum("kj,i->kij", 0.5 * R + eye / (4.0 * t), pd.W)
    )
    cov_0j = pd.DW / (2.0 * t)
    heat_0j = 0.5 * (pd.DtW - pd.LapW - pd.W / t)
    coeff = t * R + 0.5 * eye
    heat_sp = (
        t * (pd.DtU - pd.LapU)
        + np.einsum("ip,pj->ij", coeff, pd.DW)
        - np.einsum("jp,pi->ij", coeff, pd.DW)
    )
    return cov_sp, cov_0j, heat_sp, heat_0j


def mutual_reconstruction_error(pd: AssumptionPointData) -> float:
    """Round-trip error of the linear dictionary between the two residual
    systems (each is an invertible linear image of the other)."""
    rA1, rA2, rA3, rA4 = assumption_residuals(pd)
    cov_sp, cov_0j, heat_sp, heat_0j = spacetime_residuals(pd)
    t, R = pd.t, pd.ricci
    eye = np.eye(pd.W.shape[0])
    # forward: assumptions -> space-time
    coeff = t * R + 0.5 * eye
    f_cov_sp = rA4
    f_cov_0j = rA3 / (2.0 * t)
    f_heat_0j = 0.5 * rA1
    f_heat_sp = (
        t * rA2 + np.einsum("ip,pj->ij", coeff, rA3) - np.einsum("jp,pi->ij", coeff, rA3)
    )
    err = max(
        np.max(np.abs(f_cov_sp - cov_sp)),
        np.max(np.abs(f_cov_0j - cov_0j)),
        np.max(np.abs(f_heat_0j - heat_0j)),
        np.max(np.abs(f_heat_sp - heat_sp)),
    )
    # inverse: space-time -> assumptions
    i_rA3 = 2.0 * t * cov_0j
    i_rA4 = cov_sp
    i_rA1 = 2.0 * heat_0j
    i_rA2 = (
        heat_sp
        - np.einsum("ip,pj->ij", coeff, i_rA3)
        + np.einsum("jp,pi->ij", coeff, i_rA3)
    ) / t
    err = max(
        err,
        np.max(np.abs(i_rA1 - rA1)),
        np.max(np.abs(i_rA2 - rA2)),
        np.max(np.abs(i_rA3 - rA3)),
        np.max(np.abs(i_rA4 - rA4)),
    )
    return float(err)


# ---------------------------------------------------------------------------
# minimum-eigenvalue extraction


@dataclass
class QuadraticSample:
    point: ChartPoint
    quadratic_id: str
    min_eigenvalue: float
    argmin: np.ndarray
    value_at: Optional[float] = None


def two_vector_basis(g):
    """Orthonormal basis of (2-forms + 1-forms): (e_a ^ e_b)/sqrt(2), e_c."""
    n = g.shape[0]
    frame = orthonormal_frame(g)
    basis = []
    for a, b in ordered_pairs(n):
        U = (np.outer(frame[:, a], frame[:, b]) - np.outer(frame[:, b], frame[:, a])) / math.sqrt(2.0)
        basis.append((U, np.zeros(n)))
    for c in range(n):
        basis.append((np.zeros((n, n)), frame[:, c]))
    return basis


def quadratic_matrix(q, basis):
    """Symmetric matrix of a homogeneous quadratic q(U, W) over a basis."""
    dim = len(basis)
    diag = [q(U, W) for U, W in basis]
    Q = np.zeros((dim, dim))
    for i in range(dim):
        Q[i, i] = diag[i]
        for j in range(i + 1, dim):
            Ui, Wi = basis[i]
            Uj, Wj = basis[j]
            val = q(Ui + Uj, Wi + Wj)
            Q[i, j] = Q[j, i] = 0.5 * (val - diag[i] - diag[j])
    return Q


def bordered_matrix(q, frame):
    """Homogenization matrix of an inhomogeneous quadratic in one vector."""
    n = frame.shape[1]
    zero = np.zeros(n)
    c = q(zero)
    b = np.zeros(n)
    Q = np.zeros((n, n))
    vals = [q(frame[:, a]) for a in range(n)]
    vals_m = [q(-frame[:, a]) for a in range(n)]
    for a in range(n):
        b[a] = 0.5 * (vals[a] - vals_m[a])
        Q[a, a] = 0.5 * (vals[a] + vals_m[a]) - c
    for a in range(n):
        for bb in range(a + 1, n):
            v = q(frame[:, a] + frame[:, bb])
            Q[a, bb] = Q[bb, a] = 0.5 * (v - vals[a] - vals[bb] + c)
    out = np.zeros((n + 1, n + 1))
    out[0, 0] = c
    out[0, 1:] = b / 2.0
    out[1:, 0] = b / 2.0
    out[1:, 1:] = Q
    return out


_MATRIX_IDS = {"Z", "Psi", "Phi_full", "kaehler_matrix", "surface_matrix"}
_TRACE_IDS = {"psi_trace", "kaehler_trace", "surface_trace"}


def quadratic_callable(qid, metric, p: ChartPoint, s, pair: Optional[FormPair] = None,
                       orientation: int = 1):
    """(q, kind): the evaluator of one named quadratic at a chart point."""
    x, t = p.x, p.time
    if qid == "Z":
        return (lambda U, W: hamilton_MPZ(metric, p, s, U, W)[2]), "matrix"
    if qid == "Psi":
        return (lambda U, W: psi_matrix(pair, metric, p, s, U, W)), "matrix"
    if qid == "Phi_full":
        return (lambda U, W: phi_full(pair, metric, p, s, U, W)), "matrix"
    if qid == "psi_trace":
        return (lambda V: psi_trace(pair, metric, p, s, V)), "trace"
    if qid == "kaehler_matrix":
        J = GeometryJet(metric, x, t, 4)
        from .chart import rotation_tensor

        rot = rotation_tensor(J.g, orientation)
        nab_rho = np.einsum("ik,akj->aij", rot, J.nabla_ricci)
        ric2 = np.einsum("jp,pl->jl", J.ricci_mixed, J.ricci)

        def q(U, W):
            out = float(np.einsum("ijkl,ij,lk->", J.riemann_low, U, U))
            out += 2.0 * float(np.einsum("j,jkl,lk->", W, nab_rho, U))
            out += float(np.einsum("ij,i,j->", J.g, W, W)) / (4.0 * t * t)
            out += float(np.einsum("ij,i,j->", J.ricci, W, W)) / t
            out += float(np.einsum("jl,j,l->", ric2 + 0.5 * J.hessian_scalar, W, W))
            return out

        return q, "matrix"
    if qid == "kaehler_trace":
        J = GeometryJet(metric, x, t, 2)
        n = metric.dimension
        z = np.array([t])
        dR_dt = float(
            diff1(lambda zz: GeometryJet(metric, x, zz[0], 2).scalar, z, 0, s.time_step, s.order)
        )

        def q(X):
            out = dR_dt + J.scalar / t
            out += 2.0 * float(J.dscalar @ X)
            out += 2.0 * float(np.einsum("ij,i,j->", J.ricci, X, X))
            out += J.scalar / t + n / (2.0 * t * t)
            return out

        return q, "trace"
    if qid == "surface_matrix":
        J = GeometryJet(metric, x, t, 2)
        gphi = pair.phi.g(x, t, metric, s)
        phi_v = pair.phi.v(x, t)
        hess_f = pair.f.h(x, t, metric, s)
        omega = math.sqrt(float(np.linalg.det(J.g))) * np.array(
            [[0.0, 1.0], [-1.0, 0.0]]
        ) * orientation

        def q(U, W):
            out = J.scalar * two_form_norm2(U, J.g)
            out -= 2.0 * float(gphi @ W) * float(np.einsum("kl,kl->", omega, U))
            out += phi_v**2 * float(np.einsum("ij,i,j->", J.g, W, W))
            out += 2.0 * float(np.einsum("ij,i,j->", hess_f, W, W))
            return out

        return q, "matrix"
    if qid == "surface_trace":
        J = GeometryJet(metric, x, t, 2)
        gphi = pair.phi.g(x, t, metric, s)
        phi_v = pair.phi.v(x, t)
        dtf = pair.f.lap(x, t, metric, s) + phi_v**2

        def q(X):
            return (
                J.scalar * float(np.einsum("ij,i,j->", J.g, X, X))
                + 2.0 * float(gphi @ X)
                + dtf
            )

        return q, "trace"
    raise UnsupportedOperationError(f"unknown quadratic id {qid!r}")


def min_eigenvalue(qid, metric, p: ChartPoint, s, pair=None, orientation=1,
                   value_args=None) -> QuadraticSample:
    """Smallest eigenvalue of a named quadratic over its argument space.

    Matrix quadratics are diagonalized over the orthonormal basis of
    (2-forms + 1-forms); trace quadratics, which carry constant and linear
    parts, are homogenized by a bordered matrix whose non-negativity is
    equivalent to pointwise non-negativity of the quadratic.
    """
    q, kind = quadratic_callable(qid, metric, p, s, pair, orientation)
    g = metric(p.x, p.time)
    if kind == "matrix":
        basis = two_vector_basis(g)
        Q = quadratic_matrix(q, basis)
    else:
        Q = bordered_matrix(q, orthonormal_frame(g))
    w, v = np.linalg.eigh(Q)
    value_at = None
    if value_args is not None:
        value_at = q(*value_args)
    return QuadraticSample(p, qid, float(w[0]), v[:, 0], value_at)


# ---------------------------------------------------------------------------
# the scalar monitor on surfaces


def f_and_n_values(R, grad_R, phi, grad_phi, hess_phi, lap_phi, lap_f, g):
    """F = Lap f + phi^2 - |grad phi|^2 / R and the pointwise certificate

    N = 2 |nabnab phi - grad phi x grad ln R|^2
        - (Lap phi - <grad phi, grad ln R>)^2  >= 0  (2-D Cauchy-Schwarz).

    All inputs are covariant components at one point of a surface; R > 0.
    """
    ginv = np.linalg.inv(g)
    grad_lnR = grad_R / R
    gp2 = float(np.einsum("ij,i,j->", ginv, grad_phi, grad_phi))
    F = lap_f + phi**2 - gp2 / R
    H = hess_phi - np.outer(grad_phi, grad_lnR)
    H2 = float(np.einsum("ik,jl,ij,kl->", ginv, ginv, H, H))
    mixed = float(np.einsum("ij,i,j->", ginv, grad_phi, grad_lnR))
    N = 2.0 * H2 - (lap_phi - mixed) ** 2
    return float(F), float(N)


def f_monitor(pair: FormPair, metric, p: ChartPoint, s, eps_R: float = 1e-6):
    """(F, N) at a chart point; None when the scalar curvature is below the
    positivity floor (the point is excluded from sweeps and counted)."""
    if metric.dimension != 2:
        raise UnsupportedOperationError("the scalar monitor is a surface construction")
    x, t = p.x, p.time
    J = GeometryJet(metric, x, t, 3)
    if J.scalar <= eps_R:
        return None
    phi, f = pair.phi, pair.f
    return f_and_n_values(
        J.scalar,
        J.dscalar,
        phi.v(x, t),
        phi.g(x, t, metric, s),
        phi.h(x, t, metric, s),
        phi.lap(x, t, metric, s),
        f.lap(x, t, metric, s),
        J.g,
    )
