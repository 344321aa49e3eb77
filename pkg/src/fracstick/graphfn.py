"""Grid-sampled graph functions with analytic exterior data.

A GraphFunction holds node values over a uniform grid plus the exterior
datum psi as an analytic callable.  The datum fills every non-interior
node and supplies values beyond the grid, so curvature quadrature can
reach arbitrarily far without storing a larger array.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError
from .geometry import PlanarDomain, UniformGrid

__all__ = [
    "ExteriorDatum",
    "GraphFunction",
    "smoothstep",
    "plateau_bump",
    "datum_zero",
    "datum_constant",
    "datum_bump",
    "datum_windowed_tanh",
    "datum_from_config",
]


def smoothstep(t):
    """Quintic ramp: 0 for t <= 0, 1 for t >= 1, C^2 in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def plateau_bump(u):
    """Radial profile clip(((1 - u^2)/0.75)^2, 0, 1): 1 on u <= 1/2, 0 on u >= 1.

    The quartic has closed-form derivative bounds, which the barrier
    certificates use; the same profile serves datum bumps so that a datum
    of height H dominates a barrier bump of height <= H pointwise.
    """
    u = np.abs(np.asarray(u, dtype=float))
    core = (1.0 - u * u) / 0.75
    return np.clip(core * core, 0.0, 1.0) * (u < 1.0)


@dataclass(frozen=True)
class ExteriorDatum:
    """Bounded analytic exterior datum psi with decay metadata.

    `support_radius` promises psi == far_value outside that ball, letting
    the curvature far field close with an exact constant-level tail.
    """

    fn: Callable
    bound: float
    support_radius: float
    far_value: float = 0.0
    description: dict = field(default_factory=dict)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        vals = np.asarray(self.fn(np.atleast_2d(pts)), dtype=float)
        return float(vals[0]) if single else vals


def datum_zero(ndim: int = 2) -> ExteriorDatum:
    return ExteriorDatum(
        fn=lambda p: np.zeros(p.shape[0]),
        bound=0.0,
        support_radius=0.0,
        far_value=0.0,
        description={"kind": "zero"},
    )


def datum_constant(value: float) -> ExteriorDatum:
    return ExteriorDatum(
        fn=lambda p: np.full(p.shape[0], float(value)),
        bound=abs(value),
        support_radius=0.0,
        far_value=float(value),
        description={"kind": "constant", "value": repr(float(value))},
    )


def datum_bump(center, radius: float, height: float) -> ExteriorDatum:
    """Plateau bump of the given height on B_radius(center), == height on the half-radius ball."""
    center = np.asarray(center, dtype=float)

    def fn(p):
        r = np.linalg.norm(p - center, axis=1) / radius
        return height * plateau_bump(r)

    return ExteriorDatum(
        fn=fn,
        bound=abs(height),
        support_radius=float(np.linalg.norm(center) + radius),
        far_value=0.0,
        description={
            "kind": "bump",
            "center": " ".join(repr(c) for c in center),
            "radius": repr(float(radius)),
            "height": repr(float(height)),
        },
    )


def datum_windowed_tanh(
    height: float, steepness: float, r_inner: float, r_full: float, r_fade: float, r_outer: float
) -> ExteriorDatum:
    """Sign-changing far-field datum: height * tanh(k x1), windowed to an annulus.

    Vanishes identically on |x| <= r_inner and |x| >= r_outer, ramping with
    quintic smoothsteps in between; gives a +-height datum away from the
    origin with compact support.
    """

    def fn(p):
        r = np.linalg.norm(p, axis=1)
        win = smoothstep((r - r_inner) / (r_full - r_inner)) * (
            1.0 - smoothstep((r - r_fade) / (r_outer - r_fade))
        )
        return height * np.tanh(steepness * p[:, 0]) * win

    return ExteriorDatum(
        fn=fn,
        bound=abs(height),
        support_radius=float(r_outer),
        far_value=0.0,
        description={
            "kind": "windowed-tanh",
            "height": repr(float(height)),
            "steepness": repr(float(steepness)),
            "radii": f"{r_inner!r} {r_full!r} {r_fade!r} {r_outer!r}",
        },
    )


def datum_from_config(cfg: dict) -> ExteriorDatum:
    kind = cfg["kind"]
    if kind == "zero":
        return datum_zero()
    if kind == "constant":
        return datum_constant(float(cfg["value"]))
    if kind == "bump":
        center = [float(v) for v in cfg["center"].split()]
        return datum_bump(center, float(cfg["radius"]), float(cfg["height"]))
    if kind == "windowed-tanh":
        radii = [float(v) for v in cfg["radii"].split()]
        return datum_windowed_tanh(float(cfg["height"]), float(cfg["steepness"]), *radii)
    raise DomainError(f"unknown datum kind {kind!r}")


class GraphFunction:
    """Node values over a grid, pinned to the exterior datum outside omega."""

    def __init__(self, grid: UniformGrid, values, datum: ExteriorDatum, interior_mask, cap=None):
        values = np.asarray(values, dtype=float)
        interior_mask = np.asarray(interior_mask, dtype=bool)
        if values.shape != grid.shape or interior_mask.shape != grid.shape:
            raise DomainError("values and mask must match the grid shape")
        if not np.all(np.isfinite(values)):
            raise DomainError("graph values must be finite")
        limit = max(datum.bound, cap) if cap is not None else None
        if limit is not None and np.abs(values).max() > limit + 1e-12:
            raise DomainError("graph values exceed the datum bound / declared cap")
        self.grid = grid
        self.datum = datum
        self.interior_mask = interior_mask
        self.values = values.copy()
        self.cap = cap
        self._pin_exterior()

    def _pin_exterior(self):
        ext = ~self.interior_mask
        if np.any(ext):
            pts = self.grid.nodes()[ext.ravel()]
            self.values[ext] = self.datum(pts)

    @classmethod
    def from_domain(
        cls, domain: PlanarDomain, datum: ExteriorDatum, grid: UniformGrid, cap=None
    ) -> "GraphFunction":
        mask = domain.classify_nodes(grid.nodes()).reshape(grid.shape)
        values = datum(grid.nodes()).reshape(grid.shape)
        return cls(grid, values, datum, mask, cap=cap)

    @classmethod
    def from_callable(cls, grid: UniformGrid, fn, datum: ExteriorDatum = None, interior_mask=None):
        """Sample an analytic graph everywhere; defaults to an all-interior mask."""
        vals = np.asarray(fn(grid.nodes()), dtype=float).reshape(grid.shape)
        if interior_mask is None:
            interior_mask = np.ones(grid.shape, dtype=bool)
        if datum is None:
            datum = ExteriorDatum(
                fn=lambda p: np.asarray(fn(p), dtype=float),
                bound=float(np.abs(vals).max()),
                support_radius=np.inf,
                description={"kind": "callable"},
            )
        return cls(grid, vals, datum, interior_mask)

    def with_values(self, values) -> "GraphFunction":
        return GraphFunction(self.grid, values, self.datum, self.interior_mask, cap=self.cap)

    def interior_indices(self):
        """Interior node multi-indices in lexicographic (C) order."""
        return np.argwhere(self.interior_mask)

    def copy(self) -> "GraphFunction":
        return self.with_values(self.values)
