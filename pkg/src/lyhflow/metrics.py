"""Time-dependent metrics on coordinate charts, with derivative access.

A :class:`MetricFamily` bundles an evaluator ``g(x, t) -> (n, n)`` with an
open box domain, an existence interval, and (optionally) analytic partial
derivatives.  The catalog members are built symbolically, so their mixed
partials are exact closed forms; metrics reconstructed from simulation grids
supply their own derivative access instead.

Chart conventions: spatial coordinates are ``x^1..x^n`` and the time variable
rides along separately; the rescaled picture ``gbar(tbar) = e^{-tbar} g(e^{tbar})``
is produced by :meth:`MetricFamily.rescaled`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .fd import ChartDomainError, DegenerateMetricError, DerivativeStencil, diff1


@dataclass(frozen=True)
class ChartPoint:
    """A point of a chart together with the (ordinary) time of evaluation."""

    coords: tuple
    time: float
    chart_id: str = ""

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class Box:
    """Open box domain with a safety margin; stencils must stay inside."""

    lo: tuple
    hi: tuple
    margin: float = 0.0

    def contains(self, x, pad: float = 0.0) -> bool:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        x = np.asarray(x, dtype=float)
        return bool(np.all(x - pad - self.margin > lo) and np.all(x + pad + self.margin < hi))

    @property
    def scale(self) -> float:
        return float(np.max(np.asarray(self.hi) - np.asarray(self.lo)))


class MetricFamily:
    """An analytic family g(t) of Riemannian metrics on one chart.

    ``partial(x, t, alpha, kt)`` returns d^alpha_x d^kt_t g as an (n, n)
    array; when the family was built symbolically this is exact.  Without
    analytic access, spatial jets fall back to finite differences of the
    plain evaluator with per-order steps (used only for low orders).
    """

    def __init__(
        self,
        dimension: int,
        components: Callable[[np.ndarray, float], np.ndarray],
        existence_interval: tuple,
        domain: Box,
        description: str = "",
        derivative_order: int = 4,
        partial: Optional[Callable] = None,
        chart_id: str = "",
        symbolic: Optional[tuple] = None,
    ):
        self.dimension = dimension
        self.components = components
        self.existence_interval = existence_interval
        self.domain = domain
        self.description = description
        self.derivative_order = derivative_order
        self._partial = partial
        self.chart_id = chart_id or description
        self.symbolic = symbolic  # (matrix expr, coord symbols, time symbol)

    # -- evaluation -------------------------------------------------------

    def __call__(self, x, t) -> np.ndarray:
        g = np.asarray(self.components(np.asarray(x, dtype=float), float(t)), dtype=float)
        return g

    def check_point(self, x, t, pad: float = 0.0) -> None:
        t0, t1 = self.existence_interval
        if not (t0 < t < t1):
            raise ChartDomainError(
                f"time {t} outside existence interval ({t0}, {t1}) of {self.chart_id}"
            )
        if not self.domain.contains(x, pad):
            raise ChartDomainError(
                f"point {np.asarray(x)} (pad {pad}) outside domain of {self.chart_id}"
            )

    def check_positive_definite(self, x, t) -> np.ndarray:
        g = self(x, t)
        if not np.all(np.isfinite(g)):
            raise DegenerateMetricError(f"non-finite metric at {x}, t={t}")
        if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise DegenerateMetricError(f"metric not symmetric at {x}, t={t}")
        w = np.linalg.eigvalsh(0.5 * (g + g.T))
        if w[0] <= 0:
            raise DegenerateMetricError(f"metric not positive definite at {x}, t={t}: eig {w}")
        return g

    # -- derivative access --------------------------------------------------

    def partial(self, x, t, alpha, kt=0) -> np.ndarray:
        """d^alpha_x d^kt_t g_{ij}; ``alpha`` is a spatial multi-index tuple."""
        x = np.asarray(x, dtype=float)
        if self._partial is not None:
            return np.asarray(self._partial(x, float(t), tuple(alpha), int(kt)), dtype=float)
        return self._fd_partial(x, float(t), tuple(alpha), int(kt))

    def _fd_partial(self, x, t, alpha, kt):
        total = sum(alpha) + kt
        if total == 0:
            return self(x, t)
        # peel one derivative; step grows with the remaining depth to keep
        # cancellation below truncation
        h_base = 1e-3 * max(1.0, self.domain.scale)
        h = h_base * (3.0 ** (total - 1))
        z = np.concatenate([x, [t]])
        if kt > 0:
            f = lambda zp: self._fd_partial(zp[:-1], zp[-1], alpha, kt - 1)
            return diff1(f, z, self.dimension, h, 4)
        dim = next(i for i, a in enumerate(alpha) if a > 0)
        alpha2 = tuple(a - 1 if i == dim else a for i, a in enumerate(alpha))
        f = lambda zp: self._fd_partial(zp[:-1], zp[-1], alpha2, 0)
        return diff1(f, z, dim, h, 4)

    def jet(self, x, t, order) -> list:
        """Spatial jet [g, dg, ddg, ...]; dg[a,i,j] = d_a g_ij and so on."""
        n = self.dimension
        out = [self(x, t)]
        for k in range(1, order + 1):
            arr = np.zeros((n,) * k + (n, n))
            for idx in np.ndindex(*(n,) * k):
                alpha = [0] * n
                for d in idx:
                    alpha[d] += 1
                # mixed partials are symmetric; compute each ordered tuple once
                srt = tuple(sorted(idx))
                if srt != idx:
                    arr[idx] = arr[srt]
                    continue
                arr[idx] = self.partial(x, t, tuple(alpha), 0)
            # symmetrize storage across permutations of the derivative axes
            for idx in np.ndindex(*(n,) * k):
                arr[idx] = arr[tuple(sorted(idx))]
            out.append(arr)
        return out

    # -- picture changes ----------------------------------------------------

    def rescaled(self) -> "MetricFamily":
        """The family gbar(tbar) = e^{-tbar} g(e^{tbar}) in log time."""
        if self.symbolic is not None:
            expr, xs, tt = self.symbolic
            tb = sp.Symbol("tbar_internal", real=True)
            new_expr = sp.exp(-tb) * expr.subs(tt, sp.exp(tb))
            t0, t1 = self.existence_interval
            lo = math.log(t0) if t0 > 0 else -12.0
            hi = math.log(t1) if t1 > 0 and math.isfinite(t1) else 12.0
            return symbolic_metric_family(
                new_expr,
                xs,
                tb,
                (lo, hi),
                self.domain,
                description=self.description + " [rescaled]",
                chart_id=self.chart_id + ":rescaled",
                derivative_order=self.derivative_order,
            )
        return _NumericRescaled(self)

    def restricted(self, interval) -> "MetricFamily":
        out = MetricFamily(
            self.dimension,
            self.components,
            interval,
            self.domain,
            self.description,
            self.derivative_order,
            self._partial,
            self.chart_id,
            self.symbolic,
        )
        return out


class _NumericRescaled(MetricFamily):
    """Log-time rescale of a family that only has numeric derivative access."""

    def __init__(self, base: MetricFamily):
        self.base = base
        t0, t1 = base.existence_interval
        lo = math.log(t0) if t0 > 0 else -12.0
        hi = math.log(t1) if t1 > 0 and math.isfinite(t1) else 12.0
        super().__init__(
            base.dimension,
            lambda x, tb: math.exp(-tb) * base(x, math.exp(tb)),
            (lo, hi),
            base.domain,
            base.description + " [rescaled]",
            base.derivative_order,
            partial=self._partial_bar,
            chart_id=base.chart_id + ":rescaled",
        )

    def _partial_bar(self, x, tb, alpha, kt):
        t = math.exp(tb)
        base = self.base

        def p(k):
            return base.partial(x, t, alpha, k)

        f0 = math.exp(-tb) * p(0)
        if kt == 0:
            return f0
        f1 = -f0 + p(1)
        if kt == 1:
            return f1
        if kt == 2:
            return f0 - p(1) + t * p(2)
        raise ValueError("numeric rescale supports time order <= 2")


# ---------------------------------------------------------------------------
# symbolic construction


def symbolic_metric_family(
    expr: sp.Matrix,
    xs,
    tt,
    existence_interval,
    domain: Box,
    description="",
    chart_id="",
    derivative_order=4,
) -> MetricFamily:
    """Compile a sympy metric matrix into a MetricFamily with exact jets."""
    n = len(xs)
    args = tuple(xs) + (tt,)
    cache: dict = {}

    def lam(alpha, kt):
        key = (tuple(alpha), kt)
        fn = cache.get(key)
        if fn is None:
            d = expr
            for s, a in zip(xs, alpha):
                if a:
                    d = sp.diff(d, s, a)
            if kt:
                d = sp.diff(d, tt, kt)
            fn = sp.lambdify(args, d, "numpy")
            cache[key] = fn
        return fn

    def components(x, t):
        return np.asarray(lam((0,) * n, 0)(*x, t), dtype=float)

    def partial(x, t, alpha, kt):
        return np.asarray(lam(alpha, kt)(*x, t), dtype=float)

    return MetricFamily(
        n,
        components,
        existence_interval,
        domain,
        description=description,
        derivative_order=derivative_order,
        partial=partial,
        chart_id=chart_id or description,
        symbolic=(expr, tuple(xs), tt),
    )


# ---------------------------------------------------------------------------
# chart catalog


def _flat_torus() -> MetricFamily:
    x, y, t = sp.symbols("x y t", real=True)
    g = sp.eye(2)
    return symbolic_metric_family(
        g, (x, y), t, (-4.0, 4.0), Box((-7.0, -7.0), (7.0, 7.0), 0.1),
        description="flat square torus, side 2*pi", chart_id="flat_torus",
    )


def _cigar() -> MetricFamily:
    # g = (dx^2 + dy^2)/(e^{4t} + x^2 + y^2); steady translating solution
    x, y, t = sp.symbols("x y t", real=True)
    c = 1 / (sp.exp(4 * t) + x**2 + y**2)
    g = sp.Matrix([[c, 0], [0, c]])
    return symbolic_metric_family(
        g, (x, y), t, (-0.5, 1.5), Box((-2.0, -2.0), (2.0, 2.0), 0.05),
        description="cigar metric in the plane chart", chart_id="cigar",
    )


def _round_sphere(rho0: float = 1.0) -> MetricFamily:
    # colatitude/longitude chart; squared radius rho0 - 2t shrinks linearly
    th, ph, t = sp.symbols("theta phi t", real=True)
    rho = rho0 - 2 * t
    g = sp.Matrix([[rho, 0], [0, rho * sp.sin(th) ** 2]])
    return symbolic_metric_family(
        g, (th, ph), t, (-1.0, rho0 / 2.0),
        Box((0.35, -7.0), (math.pi - 0.35, 7.0), 0.05),
        description="round shrinking 2-sphere, colatitude chart", chart_id="round_sphere_2d",
    )


def _flat_plane() -> MetricFamily:
    x, y, t = sp.symbols("x y t", real=True)
    return symbolic_metric_family(
        sp.eye(2), (x, y), t, (1e-3, 10.0), Box((-3.0, -3.0), (3.0, 3.0), 0.1),
        description="flat plane (expanding gradient soliton carrier)", chart_id="flat_plane",
    )


def _flat_r3() -> MetricFamily:
    x, y, z, t = sp.symbols("x y z t", real=True)
    return symbolic_metric_family(
        sp.eye(3), (x, y, z), t, (-4.0, 4.0),
        Box((-3.0, -3.0, -3.0), (3.0, 3.0, 3.0), 0.1),
        description="flat 3-space chart", chart_id="flat_r3",
    )


def _bumpy_sphere() -> MetricFamily:
    # static axisymmetric perturbation of the round metric; not a flow
    # solution, used for operator generality tests only
    th, ph, t = sp.symbols("theta phi t", real=True)
    w = sp.exp(sp.Rational(1, 5) * sp.cos(2 * th))
    g = sp.Matrix([[w, 0], [0, w * sp.sin(th) ** 2]])
    return symbolic_metric_family(
        g, (th, ph), t, (-4.0, 4.0), Box((0.35, -7.0), (math.pi - 0.35, 7.0), 0.05),
        description="static bumpy sphere (operator tests)", chart_id="bumpy_sphere",
    )


_CATALOG_BUILDERS = {
    "flat_torus": _flat_torus,
    "cigar": _cigar,
    "round_sphere_2d": _round_sphere,
    "flat_plane": _flat_plane,
    "flat_r3": _flat_r3,
    "bumpy_sphere": _bumpy_sphere,
}

_CATALOG_CACHE: dict = {}


def chart_metric(name: str) -> MetricFamily:
    """Catalog lookup; instances are cached (they are immutable in use)."""
    if name not in _CATALOG_BUILDERS:
        raise KeyError(f"unknown chart metric {name!r}; have {sorted(_CATALOG_BUILDERS)}")
    if name not in _CATALOG_CACHE:
        _CATALOG_CACHE[name] = _CATALOG_BUILDERS[name]()
    return _CATALOG_CACHE[name]


def default_stencil(metric: MetricFamily, order: int = 4) -> DerivativeStencil:
    """h = 1e-3 * domain scale, h_t = 1e-3 * existence-interval scale."""
    t0, t1 = metric.existence_interval
    tscale = min(abs(t1 - t0), 2.0)
    return DerivativeStencil(1e-3 * metric.domain.scale, 1e-3 * tscale, order)


def sample_points(metric, count, rng, t_window=None, pad=0.1):
    """Uniform random chart points, stencil-safe, with times in ``t_window``."""
    lo = np.asarray(metric.domain.lo) + metric.domain.margin + pad
    hi = np.asarray(metric.domain.hi) - metric.domain.margin - pad
    t0, t1 = t_window if t_window is not None else metric.existence_interval
    shrink = 0.05 * (t1 - t0)
    pts = []
    for _ in range(count):
        x = rng.uniform(lo, hi)
        t = rng.uniform(t0 + shrink, t1 - shrink)
        pts.append(ChartPoint(tuple(x), float(t), metric.chart_id))
    return pts
