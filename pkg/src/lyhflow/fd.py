"""Central finite differences with selectable accuracy order.

All derivative estimates in the package come through these helpers: they
differentiate arbitrary array-valued evaluators ``f(z) -> ndarray`` along one
coordinate of a point ``z`` with classical central stencils of order 2, 4 or
6.  Evaluators are assumed smooth; the caller is responsible for keeping the
stencil inside the evaluator's domain (evaluators raise ``ChartDomainError``
otherwise, which is propagated untouched).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ChartDomainError(ValueError):
    """A stencil point left the declared chart domain (minus its margin)."""


class DegenerateMetricError(ValueError):
    """Metric failed the positive-definiteness gate at a sample."""


class UnsupportedOperationError(ValueError):
    """Operation invoked outside its declared scope (degree, rank, dimension)."""


# offsets are in units of h; first derivative then second derivative tables
_D1 = {
    2: ([-1, 1], [-0.5, 0.5]),
    4: ([-2, -1, 1, 2], [1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0]),
    6: (
        [-3, -2, -1, 1, 2, 3],
        [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
    ),
}

_D2 = {
    2: ([-1, 0, 1], [1.0, -2.0, 1.0]),
    4: (
        [-2, -1, 0, 1, 2],
        [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
    ),
    6: (
        [-3, -2, -1, 0, 1, 2, 3],
        [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
    ),
}


@dataclass(frozen=True)
class DerivativeStencil:
    """Step sizes and accuracy order for the finite-difference operators.

    ``spatial_step`` and ``time_step`` are absolute steps (already scaled by
    the caller to the chart's domain scale).  ``order`` selects the stencil
    coefficient table.
    """

    spatial_step: float = 1e-3
    time_step: float = 1e-3
    order: int = 4

    def __post_init__(self):
        if self.spatial_step <= 0 or self.time_step <= 0:
            raise ValueError("stencil steps must be positive")
        if self.order not in (2, 4, 6):
            raise ValueError(f"unsupported accuracy order {self.order}")

    def reach(self) -> int:
        """Number of steps the widest first-derivative stencil extends."""
        return {2: 1, 4: 2, 6: 3}[self.order]

    def halved(self) -> "DerivativeStencil":
        return DerivativeStencil(self.spatial_step / 2.0, self.time_step / 2.0, self.order)

    def scaled(self, factor: float) -> "DerivativeStencil":
        return DerivativeStencil(self.spatial_step * factor, self.time_step * factor, self.order)


def diff1(f, z, dim, h, order=4):
    """First derivative of ``f`` along coordinate ``dim`` at point ``z``.

    ``z`` is a 1-D float array; ``f`` maps such a point to a float or ndarray.
    """
    offsets, coeffs = _D1[order]
    z = np.asarray(z, dtype=float)
    acc = None
    for off, c in zip(offsets, coeffs):
        zp = z.copy()
        zp[dim] += off * h
        val = c * np.asarray(f(zp), dtype=float)
        acc = val if acc is None else acc + val
    return acc / h


def diff2(f, z, dim, h, order=4):
    """Second derivative of ``f`` along one coordinate."""
    offsets, coeffs = _D2[order]
    z = np.asarray(z, dtype=float)
    acc = None
    for off, c in zip(offsets, coeffs):
        zp = z.copy()
        zp[dim] += off * h
        val = c * np.asarray(f(zp), dtype=float)
        acc = val if acc is None else acc + val
    return acc / (h * h)


def diff_mixed(f, z, dim_a, dim_b, h_a, h_b, order=4):
    """Mixed second derivative d_a d_b f via tensor-product first stencils."""
    if dim_a == dim_b:
        return diff2(f, z, dim_a, h_a, order)

    def inner(zp):
        return diff1(f, zp, dim_b, h_b, order)

    return diff1(inner, z, dim_a, h_a, order)


def gradient(f, z, dims, h, order=4):
    """Stack of first derivatives along each dim in ``dims`` (leading axis)."""
    return np.stack([diff1(f, z, d, h, order) for d in dims])
