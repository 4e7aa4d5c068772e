"""Identity reports and their serialization."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional


@dataclass
class IdentityReport:
    """Outcome of sweeping one component identity over sample points."""

    identity_name: str
    max_residual: float
    sample_count: int
    tolerance: float
    convergence_order: Optional[float] = None
    pass_: bool = field(default=False)
    detail: str = ""

    def __post_init__(self):
        self.pass_ = bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        return d

    def __str__(self):
        tag = "PASS" if self.pass_ else "FAIL"
        order = f"  order={self.convergence_order:.2f}" if self.convergence_order else ""
        return (
            f"[{tag}] {self.identity_name}: max residual {self.max_residual:.3e} "
            f"(tol {self.tolerance:.1e}, {self.sample_count} samples){order}"
        )


def default_tolerance(scale: float, floor: float = 1e-6) -> float:
    """max(floor, 1e3 * machine epsilon * scale)."""
    return max(floor, 1e3 * 2.220446049250313e-16 * abs(scale))
