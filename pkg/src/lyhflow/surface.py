"""2-D Ricci flow in conformal gauge with positivity monitoring.

The flow runs on two closed backgrounds: the flat square torus (periodic
N x N grid, g = e^{2u} (dx^2 + dy^2)) and the round sphere restricted to
axisymmetric data (cell-centered colatitude grid, g = e^{2u} ghat).  The
conformal factor obeys du/dt = -R/2 with R = e^{-2u} (R0 - 2 Lap0 u), and
the companion scalars evolve by d(phi)/dt = Lap phi + R phi and
d(f)/dt = Lap f + phi^2.  Spatial discretization is second-order centered
differences (even ghost reflection through the poles); time stepping is
classical RK4 under the diffusive step restriction.

``axisym_state_metric`` reconstructs an analytic metric family from a
snapshot (cosine-series interpolant in colatitude, second-order Taylor
expansion in time driven by the flow equations), which is how grid states
enter the space-time identity machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .fd import DerivativeStencil
from .metrics import Box, MetricFamily, symbolic_metric_family
from .harnack import ScalarField


class FlowBlowUpError(RuntimeError):
    """NaN/Inf detected during stepping; carries the last good state."""

    def __init__(self, msg, state=None, rows=None):
        super().__init__(msg)
        self.state = state
        self.rows = rows or []


class StepSizeError(RuntimeError):
    """The admissible step collapsed below the hard floor."""


@dataclass
class SurfaceState:
    background: str  # "torus" | "sphere_axisym"
    u: np.ndarray
    phi: np.ndarray
    f: np.ndarray
    time: float
    resolution: int
    bc_record: str = ""

    def copy_with(self, **kw):
        return replace(self, **kw)


@dataclass
class FlowConfig:
    t_end: float
    dt_safety: float = 0.5
    monitor_stride: int = 50
    quadratics: tuple = ("surface_trace", "surface_matrix")
    phi_f_mode: str = "explicit_pde"  # or "closed_form_tR1"
    eps_num: float = 1e-4
    max_curvature_factor: float = 1e3
    dt_floor: float = 1e-9


# ---------------------------------------------------------------------------
# grids


def torus_grid(N):
    h = 2.0 * math.pi / N
    x = (np.arange(N) + 0.0) * h
    return x, h


def sphere_grid(N):
    h = math.pi / N
    theta = (np.arange(N) + 0.5) * h
    return theta, h


def _ghost_even(v):
    """Pad a colatitude profile with even reflections through both poles."""
    return np.concatenate([v[:1], v, v[-1:]])


def sphere_d_theta(v, h):
    g = _ghost_even(v)
    return (g[2:] - g[:-2]) / (2.0 * h)


def sphere_dd_theta(v, h):
    g = _ghost_even(v)
    return (g[2:] - 2.0 * g[1:-1] + g[:-2]) / (h * h)


def sphere_laplacian0(v, theta, h):
    """Background (round, unit) axisymmetric Laplacian d2 + cot(theta) d."""
    return sphere_dd_theta(v, h) + sphere_d_theta(v, h) / np.tan(theta)


def torus_laplacian0(v, h):
    return (
        np.roll(v, 1, 0) + np.roll(v, -1, 0) + np.roll(v, 1, 1) + np.roll(v, -1, 1) - 4.0 * v
    ) / (h * h)


def torus_grad0(v, h):
    dx = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2.0 * h)
    dy = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2.0 * h)
    return dx, dy


# ---------------------------------------------------------------------------
# state construction and basic geometry


def make_state(background, N, t0, u0=None, phi0=None, f0=None) -> SurfaceState:
    if background == "torus":
        x, h = torus_grid(N)
        X, Y = np.meshgrid(x, x, indexing="ij")
        shape = (N, N)
        coords = (X, Y)
        bc = "periodic"
    elif background == "sphere_axisym":
        theta, h = sphere_grid(N)
        shape = (N,)
        coords = (theta,)
        bc = "cell-centered colatitude, even ghost reflection at both poles"
    else:
        raise ValueError(f"unknown background {background!r}")
    u = np.zeros(shape) if u0 is None else np.asarray(u0(*coords), dtype=float)
    phi = np.ones(shape) if phi0 is None else np.asarray(phi0(*coords), dtype=float)
    f = np.zeros(shape) if f0 is None else np.asarray(f0(*coords), dtype=float)
    return SurfaceState(background, u, phi, f, float(t0), N, bc)


def background_r0(state) -> float:
    return 0.0 if state.background == "torus" else 2.0


def laplacian0(state, v):
    if state.background == "torus":
        _, h = torus_grid(state.resolution)
        return torus_laplacian0(v, h)
    theta, h = sphere_grid(state.resolution)
    return sphere_laplacian0(v, theta, h)


def scalar_curvature(state) -> np.ndarray:
    """R = e^{-2u} (R0 - 2 Lap0 u)."""
    return np.exp(-2.0 * state.u) * (background_r0(state) - 2.0 * laplacian0(state, state.u))


def metric_laplacian(state, v) -> np.ndarray:
    return np.exp(-2.0 * state.u) * laplacian0(state, v)


def area_element(state) -> np.ndarray:
    """Weight of the metric measure against the grid cells."""
    if state.background == "torus":
        _, h = torus_grid(state.resolution)
        return np.exp(2.0 * state.u) * h * h
    theta, h = sphere_grid(state.resolution)
    return np.exp(2.0 * state.u) * np.sin(theta) * h * 2.0 * math.pi


def gauss_bonnet(state) -> float:
    return float(np.sum(scalar_curvature(state) * area_element(state)))


# ---------------------------------------------------------------------------
# stepping


def _rhs(state: SurfaceState, evolve_phi_f: bool):
    R = scalar_curvature(state)
    du = -0.5 * R
    if evolve_phi_f:
        dphi = metric_laplacian(state, state.phi) + R * state.phi
        df = metric_laplacian(state, state.f) + state.phi**2
    else:
        dphi = np.zeros_like(state.phi)
        df = np.zeros_like(state.f)
    return du, dphi, df


def admissible_dt(state: SurfaceState, config: FlowConfig) -> float:
    if state.background == "torus":
        _, h = torus_grid(state.resolution)
    else:
        _, h = sphere_grid(state.resolution)
    return config.dt_safety * h * h * float(np.min(np.exp(2.0 * state.u))) / 4.0


def step(state: SurfaceState, config: FlowConfig, dt: Optional[float] = None) -> SurfaceState:
    """One RK4 step of the coupled system; dt defaults to the diffusive bound."""
    if dt is None:
        dt = admissible_dt(state, config)
    if dt < config.dt_floor:
        raise StepSizeError(f"time step {dt:.3e} below floor at t={state.time:.6f}")
    evolve = config.phi_f_mode == "explicit_pde"

    def shift(st, frac, du, dphi, df):
        return st.copy_with(
            u=state.u + frac * dt * du,
            phi=state.phi + frac * dt * dphi,
            f=state.f + frac * dt * df,
            time=state.time + frac * dt,
        )

    k1 = _rhs(state, evolve)
    k2 = _rhs(shift(state, 0.5, *k1), evolve)
    k3 = _rhs(shift(state, 0.5, *k2), evolve)
    k4 = _rhs(shift(state, 1.0, *k3), evolve)
    u = state.u + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    phi = state.phi + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    f = state.f + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(phi)) and np.all(np.isfinite(f))):
        raise FlowBlowUpError(f"non-finite field at t={state.time:.6f}", state=state)
    new = state.copy_with(u=u, phi=phi, f=f, time=state.time + dt)
    if config.phi_f_mode == "closed_form_tR1":
        new = apply_closed_form_pair(new)
    return new


def apply_closed_form_pair(state: SurfaceState) -> SurfaceState:
    """phi = t R + 1, f = t^2 R + t evaluated from the current curvature."""
    R = scalar_curvature(state)
    t = state.time
    return state.copy_with(phi=t * R + 1.0, f=t * t * R + t)


# ---------------------------------------------------------------------------
# induced forms and initialization


def induced_form_pair(state: SurfaceState):
    """Grid data of A = phi dS and E = -2 df, with the structural checks.

    Returns a dict holding |A|^2 (pointwise 2 phi^2), E components in the
    background chart, and the exterior-derivative defects (identically zero:
    A is a top form, E is exact).
    """
    phi2 = 2.0 * state.phi**2
    if state.background == "torus":
        _, h = torus_grid(state.resolution)
        ex, ey = torus_grad0(state.f, h)
        E = (-2.0 * ex, -2.0 * ey)
        # dE for an exact form vanishes discretely: centered curl of a
        # centered gradient telescopes to zero on the periodic grid
        curl = (np.roll(E[1], -1, 0) - np.roll(E[1], 1, 0)) / (2 * h) - (
            np.roll(E[0], -1, 1) - np.roll(E[0], 1, 1)
        ) / (2 * h)
        d_e = float(np.max(np.abs(curl)))
    else:
        _, h = sphere_grid(state.resolution)
        E = (-2.0 * sphere_d_theta(state.f, h),)
        d_e = 0.0  # single-variable 1-form is closed
    return {
        "norm_A2": phi2,
        "E": E,
        "dA_max": 0.0,  # top-degree form on a surface
        "dE_max": d_e,
    }


def init_phi_f_elliptic(state: SurfaceState, phi0: np.ndarray, margin: float = 0.05):
    """Solve Lap f = -phi^2 + mean_g(phi^2) for the initial f.

    On a closed surface, the source must have zero metric mean, so the
    pointwise level actually achieved is Lap f + phi^2 = mean_g(phi^2); the
    initial hypothesis then requires mean_g(phi^2) >= max |grad phi|^2 / R
    plus a margin, which is reported back to the caller.
    """
    phi0 = np.asarray(phi0, dtype=float)
    w = area_element(state)
    mean_phi2 = float(np.sum(phi0**2 * w) / np.sum(w))
    rho = -(phi0**2) + mean_phi2  # metric-mean-free source
    rhs0 = np.exp(2.0 * state.u) * rho  # background-Laplacian source
    if state.background == "torus":
        f0 = _poisson_torus(rhs0, state.resolution)
        _, h = torus_grid(state.resolution)
        gx, gy = torus_grad0(phi0, h)
        grad2 = np.exp(-2.0 * state.u) * (gx**2 + gy**2)
    else:
        f0 = _poisson_sphere_axisym(rhs0, state.resolution)
        _, h = sphere_grid(state.resolution)
        grad2 = np.exp(-2.0 * state.u) * sphere_d_theta(phi0, h) ** 2
    R = scalar_curvature(state)
    hypothesis = mean_phi2 - float(np.max(grad2 / R)) - margin
    return state.copy_with(phi=phi0, f=f0), hypothesis


def _poisson_torus(rhs, N):
    rhs_hat = np.fft.fft2(rhs - np.mean(rhs))
    k = np.fft.fftfreq(N, d=1.0 / N)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    denom = -(kx**2 + ky**2)
    denom[0, 0] = 1.0
    f_hat = rhs_hat / denom
    f_hat[0, 0] = 0.0
    return np.real(np.fft.ifft2(f_hat))


def _poisson_sphere_axisym(rhs, N):
    """(sin t f')' = sin t * rhs, integrated from the pole (midpoint rule)."""
    theta, h = sphere_grid(N)
    sin = np.sin(theta)
    src = sin * rhs
    flux = np.cumsum(src) * h - 0.5 * h * src  # flux at cell centers
    fp = flux / sin
    f = np.cumsum(fp) * h - 0.5 * h * fp
    return f - f.mean()


# ---------------------------------------------------------------------------
# pointwise monitor quantities on the grid


def grid_geometry(state: SurfaceState):
    """Frame components of the monitor ingredients at every node.

    Returns dict with R, grad_phi (frame), hess_f (frame), hess_phi (frame),
    lap_phi, lap_f, grad_R (frame), phi, f.
    """
    e2u = np.exp(2.0 * state.u)
    R = scalar_curvature(state)
    if state.background == "torus":
        _, h = torus_grid(state.resolution)
        ux, uy = torus_grad0(state.u, h)

        def hess_frame(v):
            vx, vy = torus_grad0(v, h)
            g = _ghost2d(v)
            vxx = (g[2:, 1:-1] - 2 * v + g[:-2, 1:-1]) / (h * h)
            vyy = (g[1:-1, 2:] - 2 * v + g[1:-1, :-2]) / (h * h)
            vxy = (
                np.roll(np.roll(v, -1, 0), -1, 1)
                - np.roll(np.roll(v, -1, 0), 1, 1)
                - np.roll(np.roll(v, 1, 0), -1, 1)
                + np.roll(np.roll(v, 1, 0), 1, 1)
            ) / (4 * h * h)
            dot = ux * vx + uy * vy
            H11 = vxx - (2 * ux * vx - dot)
            H22 = vyy - (2 * uy * vy - dot)
            H12 = vxy - (ux * vy + uy * vx)
            return H11 / e2u, H12 / e2u, H22 / e2u

        def grad_frame(v):
            vx, vy = torus_grad0(v, h)
            s = np.exp(-state.u)
            return vx * s, vy * s

    else:
        theta, h = sphere_grid(state.resolution)
        ut = sphere_d_theta(state.u, h)
        cot = 1.0 / np.tan(theta)

        def hess_frame(v):
            vt = sphere_d_theta(v, h)
            vtt = sphere_dd_theta(v, h)
            H11 = (vtt - ut * vt) / e2u
            H22 = (ut + cot) * vt / e2u
            return H11, np.zeros_like(v), H22

        def grad_frame(v):
            return sphere_d_theta(v, h) * np.exp(-state.u), np.zeros_like(v)

    out = {
        "R": R,
        "phi": state.phi,
        "f": state.f,
        "grad_phi": grad_frame(state.phi),
        "grad_R": grad_frame(R),
        "hess_f": hess_frame(state.f),
        "hess_phi": hess_frame(state.phi),
        "lap_phi": metric_laplacian(state, state.phi),
        "lap_f": metric_laplacian(state, state.f),
    }
    return out


def _ghost2d(v):
    return np.pad(v, 1, mode="wrap")


def grid_min_eigenvalues(state: SurfaceState, quadratic_id: str):
    """(grid of min eigenvalues, argmin U/W norms at the grid minimizer).

    The trace quadratic R|X|^2 + 2<grad phi, X> + df/dt is homogenized by a
    bordered 3x3 matrix per node; the matrix quadratic
    R|U|^2 - 2<grad phi, W><omega, U> + phi^2 |W|^2 + 2 Hess f(W,W) is
    assembled in the orthonormal basis ((e1^e2)/sqrt2, e1, e2).
    """
    geo = grid_geometry(state)
    R, phi = geo["R"], geo["phi"]
    g1, g2 = geo["grad_phi"]
    shape = R.shape
    flat = lambda a: np.broadcast_to(a, shape).reshape(-1)
    m = flat(R).shape[0]
    Q = np.zeros((m, 3, 3))
    if quadratic_id == "surface_trace":
        dft = flat(geo["lap_f"] + phi**2)
        Q[:, 0, 0] = dft
        Q[:, 0, 1] = Q[:, 1, 0] = flat(g1)
        Q[:, 0, 2] = Q[:, 2, 0] = flat(g2)
        Q[:, 1, 1] = Q[:, 2, 2] = flat(R)
    elif quadratic_id == "surface_matrix":
        H11, H12, H22 = (flat(a) for a in geo["hess_f"])
        Q[:, 0, 0] = flat(R)
        Q[:, 0, 1] = Q[:, 1, 0] = -math.sqrt(2.0) * flat(g1)
        Q[:, 0, 2] = Q[:, 2, 0] = -math.sqrt(2.0) * flat(g2)
        Q[:, 1, 1] = flat(phi**2) + 2.0 * H11
        Q[:, 2, 2] = flat(phi**2) + 2.0 * H22
        Q[:, 1, 2] = Q[:, 2, 1] = 2.0 * H12
    else:
        raise ValueError(f"unsupported grid quadratic {quadratic_id!r}")
    w, v = np.linalg.eigh(Q)
    mins = w[:, 0].reshape(shape)
    idx = int(np.argmin(w[:, 0]))
    vec = v[idx, :, 0]
    if quadratic_id == "surface_trace":
        norms = (abs(vec[0]), float(np.hypot(vec[1], vec[2])))
    else:
        norms = (abs(vec[0]), float(np.hypot(vec[1], vec[2])))
    return mins, norms


def grid_f_monitor(state: SurfaceState, eps_R: float = 1e-6):
    """Pointwise F and N; entries with R <= eps_R are masked out."""
    geo = grid_geometry(state)
    R = geo["R"]
    ok = R > eps_R
    g1, g2 = geo["grad_phi"]
    r1, r2 = geo["grad_R"]
    with np.errstate(divide="ignore", invalid="ignore"):
        grad_phi2 = g1**2 + g2**2
        F = geo["lap_f"] + geo["phi"] ** 2 - grad_phi2 / R
        l1, l2 = r1 / R, r2 / R  # grad ln R (frame)
        H11, H12, H22 = geo["hess_phi"]
        K11 = H11 - g1 * l1
        K12 = H12 - g1 * l2
        K21 = H12 - g2 * l1
        K22 = H22 - g2 * l2
        norm2 = K11**2 + K12**2 + K21**2 + K22**2
        mixed = g1 * l1 + g2 * l2
        N = 2.0 * norm2 - (geo["lap_phi"] - mixed) ** 2
    return F, N, ok


# ---------------------------------------------------------------------------
# the monitored run


@dataclass
class MonitorRow:
    t: float
    quadratic_id: str
    grid_min_eigenvalue: float
    argmin_norms: str
    gauss_bonnet: float
    min_F: float
    undefined_F_count: int

    def to_list(self):
        return [
            self.t,
            self.quadratic_id,
            self.grid_min_eigenvalue,
            self.argmin_norms,
            self.gauss_bonnet,
            self.min_F,
            self.undefined_F_count,
        ]


@dataclass
class FlowResult:
    rows: list
    final_state: SurfaceState
    hypothesis_met: bool
    blow_up: bool = False
    monotonicity_min: Optional[float] = None
    f_inequality_min: Optional[float] = None
    snapshots: list = field(default_factory=list)

    def min_eigenvalue_series(self, qid):
        return [(r.t, r.grid_min_eigenvalue) for r in self.rows if r.quadratic_id == qid]


def monitor_rows(state: SurfaceState, config: FlowConfig):
    gb = gauss_bonnet(state)
    F, N, ok = grid_f_monitor(state)
    min_F = float(np.min(F[ok])) if np.any(ok) else float("nan")
    undef = int(ok.size - np.count_nonzero(ok))
    rows = []
    for qid in config.quadratics:
        mins, norms = grid_min_eigenvalues(state, qid)
        rows.append(
            MonitorRow(
                state.time,
                qid,
                float(np.min(mins)),
                f"{norms[0]:.6f}|{norms[1]:.6f}",
                gb,
                min_F,
                undef,
            )
        )
    return rows, F, N


def run_with_monitors(state: SurfaceState, config: FlowConfig,
                      keep_snapshots: bool = False) -> FlowResult:
    """Advance to t_end, recording monitor rows every ``monitor_stride`` steps.

    Also tracks the running minimum over monitor intervals of the increment
    of t (t R + 1) (the zero-argument consequence of the trace estimate) and
    the discrete residual of the differential inequality for F.
    """
    if config.phi_f_mode == "closed_form_tR1":
        state = apply_closed_form_pair(state)
    rows, F_prev, _ = monitor_rows(state, config)
    hypothesis_met = all(
        r.grid_min_eigenvalue >= -config.eps_num * _quadratic_scale(state, r.quadratic_id)
        for r in rows
    )
    result_rows = list(rows)
    snapshots = [state] if keep_snapshots else []
    R0_max = float(np.max(np.abs(scalar_curvature(state))))
    mono_prev = state.time * (state.time * scalar_curvature(state) + 1.0)
    mono_min = None
    fres_min = None
    prevF = {"t": state.time, "F": F_prev, "state": state}
    blow_up = False
    while state.time < config.t_end - 1e-14:
        try:
            for _ in range(config.monitor_stride):
                dt = min(admissible_dt(state, config), config.t_end - state.time)
                state = step(state, config, dt)
                if state.time >= config.t_end - 1e-14:
                    break
        except (FlowBlowUpError, StepSizeError):
            blow_up = True
            break
        Rmax = float(np.max(np.abs(scalar_curvature(state))))
        rows, Fg, _ = monitor_rows(state, config)
        result_rows.extend(rows)
        if keep_snapshots:
            snapshots.append(state)
        mono = state.time * (state.time * scalar_curvature(state) + 1.0)
        d = float(np.min(mono - mono_prev))
        mono_min = d if mono_min is None else min(mono_min, d)
        mono_prev = mono
        fres = _f_inequality_residual(prevF, {"t": state.time, "F": Fg, "state": state})
        if fres is not None:
            fres_min = fres if fres_min is None else min(fres_min, fres)
        prevF = {"t": state.time, "F": Fg, "state": state}
        if Rmax > config.max_curvature_factor * max(R0_max, 1e-10):
            break
    return FlowResult(
        result_rows, state, hypothesis_met, blow_up, mono_min, fres_min, snapshots
    )


def _quadratic_scale(state, qid):
    geo = grid_geometry(state)
    if qid == "surface_trace":
        return max(
            float(np.max(np.abs(geo["R"]))),
            float(np.max(np.abs(geo["lap_f"] + geo["phi"] ** 2))),
            1e-10,
        )
    return max(float(np.max(np.abs(geo["R"]))), float(np.max(geo["phi"] ** 2)), 1e-10)


def _f_inequality_residual(prev, cur, r_floor=1e-3):
    """min over valid nodes of dF/dt - [Lap F + R F + (Lap phi - <grad phi,
    grad ln R> + phi R)^2 / R], forward-differenced between monitor times."""
    dt = cur["t"] - prev["t"]
    if dt <= 0:
        return None
    state = prev["state"]
    geo = grid_geometry(state)
    R = geo["R"]
    ok = R > r_floor
    if not np.any(ok):
        return None
    dFdt = (cur["F"] - prev["F"]) / dt
    lapF = metric_laplacian(state, np.where(np.isfinite(prev["F"]), prev["F"], 0.0))
    g1, g2 = geo["grad_phi"]
    r1, r2 = geo["grad_R"]
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = (g1 * r1 + g2 * r2) / R
        forcing = (geo["lap_phi"] - mixed + geo["phi"] * R) ** 2 / R
        res = dFdt - (lapF + R * prev["F"] + forcing)
    return float(np.min(res[ok]))


# ---------------------------------------------------------------------------
# snapshot -> analytic metric family (axisymmetric sphere)


def _cos_fit(values, N):
    """Coefficients c_k of sum c_k cos(k theta) through the cell centers."""
    theta, _ = sphere_grid(N)
    k = np.arange(N)
    mat = np.cos(np.outer(k, theta))
    c = (2.0 / N) * mat @ values
    c[0] *= 0.5
    return c


def _cos_series_sym(c, th, tol=1e-12):
    scale = max(np.max(np.abs(c)), 1.0)
    expr = sp.Float(0)
    for k, ck in enumerate(c):
        if abs(ck) > tol * scale:
            expr += sp.Float(float(ck)) * sp.cos(k * th)
    return expr


def axisym_state_metric(state: SurfaceState, margin: float = 0.35):
    """Analytic metric family from an axisymmetric snapshot.

    The conformal factor is interpolated by a cosine series (exact even
    extension through the poles); the time dependence is a second-order
    Taylor model driven by the flow: w(theta, t) = u - (R/2)(t - t0)
    - ((Lap R + R^2)/4)(t - t0)^2.  Also returns scalar-field models of phi
    and f (linear in time through their evolution equations).
    """
    if state.background != "sphere_axisym":
        raise ValueError("analytic reconstruction implemented for the axisymmetric sphere")
    N = state.resolution
    R = scalar_curvature(state)
    q = metric_laplacian(state, R) + R * R  # d/dt R along the flow
    th, ph, tt = sp.symbols("theta phi t", real=True)
    tau = tt - state.time
    w = (
        _cos_series_sym(_cos_fit(state.u, N), th)
        - _cos_series_sym(_cos_fit(R, N), th) / 2 * tau
        - _cos_series_sym(_cos_fit(q, N), th) / 4 * tau**2
    )
    gmat = sp.Matrix([[sp.exp(2 * w), 0], [0, sp.exp(2 * w) * sp.sin(th) ** 2]])
    tspan = 0.2 * (1.0 + abs(state.time))
    metric = symbolic_metric_family(
        gmat,
        (th, ph),
        tt,
        (state.time - tspan, state.time + tspan),
        Box((margin, -7.0), (math.pi - margin, 7.0), 0.02),
        description=f"axisymmetric snapshot at t={state.time:.4f}",
        chart_id=f"sphere_state@{state.time:.4f}",
    )
    phi_model = _scalar_series_model(state, state.phi,
                                     metric_laplacian(state, state.phi) + R * state.phi)
    f_model = _scalar_series_model(state, state.f,
                                   metric_laplacian(state, state.f) + state.phi**2)
    return metric, phi_model, f_model


def _scalar_series_model(state, values, dvalues) -> ScalarField:
    N = state.resolution
    c0 = _cos_fit(values, N)
    c1 = _cos_fit(dvalues, N)
    t0 = state.time
    k = np.arange(N)

    def _eval(c, theta, deriv):
        if deriv % 4 == 0:
            basis = np.cos(k * theta)
        elif deriv % 4 == 1:
            basis = -np.sin(k * theta)
        elif deriv % 4 == 2:
            basis = -np.cos(k * theta)
        else:
            basis = np.sin(k * theta)
        return float(np.sum(c * (k**deriv) * basis))

    def value(x, t):
        return _eval(c0, x[0], 0) + (t - t0) * _eval(c1, x[0], 0)

    def grad(x, t):
        d = _eval(c0, x[0], 1) + (t - t0) * _eval(c1, x[0], 1)
        return np.array([d, 0.0])

    return ScalarField(value, grad, None)
