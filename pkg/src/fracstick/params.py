"""Core parameter object governing every kernel and energy."""

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class FractionalParams:
    """Base dimension n of the cylinder cross-section and fractional order s.

    The ambient space is R^(n+1); all interaction kernels are
    |x - y|^(-(n+1+s)).  Graphs live over an n-dimensional grid.
    """

    n: int
    s: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise DomainError(f"n must be 1 or 2, got {self.n}")
        if not (0.0 < self.s < 1.0):
            raise DomainError(f"s must lie in (0, 1), got {self.s}")

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    @property
    def kernel_power(self) -> float:
        """Exponent p in the slope-kernel (1 + t^2)^(-p), p = (n+1+s)/2."""
        return 0.5 * (self.n + 1 + self.s)
