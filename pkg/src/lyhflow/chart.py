"""Coordinate-chart tensor calculus by finite differences.

These operators differentiate the metric evaluator itself (never its
analytic jets), so their output carries a measurable O(h^p) truncation
error; the analytic jet layer in :mod:`lyhflow.jets` serves as their oracle.
Curvature arrays follow the package conventions (``Rup[i,j,k,l] = R^l_{ijk}``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conventions import DEEP_STEP_FACTOR
from .fd import DerivativeStencil, UnsupportedOperationError, diff1
from .metrics import ChartPoint, MetricFamily


def _pad(s: DerivativeStencil, levels: int) -> float:
    return s.reach() * s.spatial_step * (1 + DEEP_STEP_FACTOR) * levels


def christoffels(metric: MetricFamily, p: ChartPoint, s: DerivativeStencil) -> np.ndarray:
    """Levi-Civita coefficients Gamma[k,i,j] at (p.x, p.time), from FD of g."""
    metric.check_point(p.x, p.time, pad=s.reach() * s.spatial_step)
    metric.check_positive_definite(p.x, p.time)
    return _christoffel_eval(metric, p.x, p.time, s)


def _christoffel_eval(metric, x, t, s):
    n = metric.dimension
    z = np.asarray(x, dtype=float)
    dg = np.stack(
        [diff1(lambda y: metric(y, t), z, d, s.spatial_step, s.order) for d in range(n)]
    )
    ginv = np.linalg.inv(metric(z, t))
    S = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, S)


def riemann(metric: MetricFamily, p: ChartPoint, s: DerivativeStencil) -> np.ndarray:
    """Rup[i,j,k,l] = R^l_{ijk} by differencing the Christoffel evaluator."""
    metric.check_point(p.x, p.time, pad=2 * s.reach() * s.spatial_step)
    metric.check_positive_definite(p.x, p.time)
    n = metric.dimension
    z = p.x
    G = _christoffel_eval(metric, z, p.time, s)
    dG = np.stack(
        [
            diff1(lambda y: _christoffel_eval(metric, y, p.time, s), z, d, s.spatial_step, s.order)
            for d in range(n)
        ]
    )
    return (
        np.einsum("iljk->ijkl", dG)
        - np.einsum("jlik->ijkl", dG)
        + np.einsum("mjk,lim->ijkl", G, G)
        - np.einsum("mik,ljm->ijkl", G, G)
    )


def ricci_and_scalar(metric: MetricFamily, p: ChartPoint, s: DerivativeStencil):
    """(R_ij, R); the Ricci output is symmetrized (defect is O(h^p) anyway)."""
    Rup = riemann(metric, p, s)
    rc = np.einsum("ijki->jk", Rup)
    rc = 0.5 * (rc + rc.T)
    ginv = np.linalg.inv(metric(p.x, p.time))
    return rc, float(np.einsum("jk,jk->", ginv, rc))


# ---------------------------------------------------------------------------
# Laplacians on fields


def _covariant_derivative_field(field, metric, x, t, s, boost=1.0):
    """nabla_a of a covariant tensor field evaluator (one new leading slot)."""
    n = metric.dimension
    z = np.asarray(x, dtype=float)
    G = _christoffel_eval(metric, z, t, s)
    T0 = np.asarray(field(z, t), dtype=float)
    out = np.zeros((n,) + T0.shape)
    for a in range(n):
        dT = diff1(lambda y: field(y, t), z, a, s.spatial_step * boost, s.order)
        corr = np.zeros_like(T0)
        for slot in range(T0.ndim):
            L = G[:, a, :].T  # L[b, m] = Gamma^m_{ab}
            corr -= np.tensordot(L, T0, axes=(1, slot)).transpose(
                _axes_back(T0.ndim, slot)
            )
        out[a] = dT + corr
    return out


def _axes_back(rank, slot):
    axes = list(range(1, rank))
    axes.insert(slot, 0)
    return axes


def rough_laplacian(field, metric, p: ChartPoint, s: DerivativeStencil):
    """Delta T = g^{pq} nabla_p nabla_q T for a covariant tensor field."""

    def inner(y, t):
        return _covariant_derivative_field(field, metric, y, t, s)

    snd = _covariant_derivative_field(inner, metric, p.x, p.time, s, boost=DEEP_STEP_FACTOR)
    ginv = np.linalg.inv(metric(p.x, p.time))
    return np.einsum("pq,pq...->...", ginv, snd)


def hodge_laplacian(form, degree: int, metric: MetricFamily, p: ChartPoint, s: DerivativeStencil):
    """Hodge-de Rham Laplacian -(d delta + delta d), sign-matched to the
    rough Laplacian on functions; degrees 0, 1, 2.

    Degree 1 uses Delta E_i - R_i^m E_m; degree 2 uses
    Delta F_ij + 2 g^{kl} R^m_{kij} F_{lm} - R_i^k F_kj - R_j^k F_ik.
    """
    if degree not in (0, 1, 2):
        raise UnsupportedOperationError(f"unsupported form degree {degree}")
    metric.check_point(p.x, p.time, pad=_pad(s, 2))
    if degree == 0:
        f0 = lambda y, t: np.asarray(form(y, t), dtype=float).reshape(())
        return rough_laplacian(f0, metric, p, s)
    rough = rough_laplacian(form, metric, p, s)
    Rup = riemann(metric, p, s)
    rc = np.einsum("ijki->jk", Rup)
    rc = 0.5 * (rc + rc.T)
    ginv = np.linalg.inv(metric(p.x, p.time))
    ric_mixed = rc @ ginv
    F = np.asarray(form(p.x, p.time), dtype=float)
    if degree == 1:
        return rough - np.einsum("im,m->i", ric_mixed, F)
    weitz = 2.0 * np.einsum("kl,kijm,lm->ij", ginv, Rup, F)
    return rough + weitz - np.einsum("ik,kj->ij", ric_mixed, F) - np.einsum("jk,ik->ij", ric_mixed, F)


def lichnerowicz_laplacian(sym2, metric: MetricFamily, p: ChartPoint, s: DerivativeStencil):
    """Delta_L phi_kj = Delta phi_kj + 2 R_{kpqj} phi^{pq} - R_j^l phi_kl - R_k^l phi_jl."""
    if metric.dimension != 2:
        raise UnsupportedOperationError("Lichnerowicz operator implemented for surfaces only")
    metric.check_point(p.x, p.time, pad=_pad(s, 2))
    rough = rough_laplacian(sym2, metric, p, s)
    Rup = riemann(metric, p, s)
    g = metric(p.x, p.time)
    ginv = np.linalg.inv(g)
    Rlow = np.einsum("ijkm,ml->ijkl", Rup, g)
    rc = np.einsum("ijki->jk", Rup)
    rc = 0.5 * (rc + rc.T)
    ric_mixed = rc @ ginv
    phi = np.asarray(sym2(p.x, p.time), dtype=float)
    phi_up = ginv @ phi @ ginv
    return (
        rough
        + 2.0 * np.einsum("kpqj,pq->kj", Rlow, phi_up)
        - np.einsum("jl,kl->kj", ric_mixed, phi)
        - np.einsum("kl,jl->kj", ric_mixed, phi)
    )


# ---------------------------------------------------------------------------
# Kaehler structure on a surface


@dataclass
class KaehlerStructure2D:
    """Rotation J (J^2 = -Id), area form, and Ricci form of a surface chart."""

    rotation: np.ndarray  # J[i, k] = J_i^k
    area_form: np.ndarray
    ricci_form: np.ndarray


def kaehler_structure(metric: MetricFamily, orientation: int, p: ChartPoint,
                      s: DerivativeStencil) -> KaehlerStructure2D:
    """J, omega, rho from the metric and a chart orientation (+1 or -1)."""
    if metric.dimension != 2:
        raise UnsupportedOperationError("Kaehler structure implemented for surfaces only")
    g = metric.check_positive_definite(p.x, p.time)
    root = float(np.sqrt(np.linalg.det(g)))
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]]) * float(orientation)
    area = root * eps  # (dS)_{ij}
    ginv = np.linalg.inv(g)
    J = area @ ginv  # J_i^k = (dS)_{ij} g^{jk}
    rc, _ = ricci_and_scalar(metric, p, s)
    rho = J @ rc  # rho_ij = J_i^k R_kj
    return KaehlerStructure2D(J, area, rho)


def rotation_tensor(g, orientation=1):
    """J for a known metric matrix (no stencil needed)."""
    root = float(np.sqrt(np.linalg.det(g)))
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]]) * float(orientation)
    return (root * eps) @ np.linalg.inv(g)


# ---------------------------------------------------------------------------


def convergence_order(residual_of_stencil, s: DerivativeStencil) -> float:
    """log2 ratio of residuals at h and h/2 (order estimate)."""
    r1 = residual_of_stencil(s)
    r2 = residual_of_stencil(s.halved())
    if r2 == 0.0:
        return float("inf")
    return float(np.log2(r1 / r2))
