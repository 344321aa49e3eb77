"""Base domains omega in R^n, uniform grids, and membership classification.

The cylinder Omega = omega x R is never meshed directly: all sets are
subgraphs over omega's bounding box, so the geometry layer only needs the
planar (or 1-D) base domain, a uniform node lattice that always contains
the origin, and a signed level function per domain kind.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, ResolutionError

__all__ = [
    "Membership",
    "UniformGrid",
    "CylinderBox",
    "TangentDisk",
    "PlanarDomain",
    "make_wedge_domain",
    "make_reentrant_domain",
    "make_interval_domain",
    "make_smooth_tangent_domain",
    "domain_from_config",
]


class Membership(Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class CylinderBox:
    """Ambient cylinder B_mu(p) x (center_height - mu, center_height + mu)."""

    base_center: tuple
    center_height: float
    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise DomainError(f"cylinder radius must be positive, got {self.mu}")

    def contains(self, X) -> bool:
        X = np.asarray(X, dtype=float)
        base = X[:-1] - np.asarray(self.base_center, dtype=float)
        return bool(
            np.linalg.norm(base) < self.mu and abs(X[-1] - self.center_height) < self.mu
        )


class UniformGrid:
    """Uniform node lattice over a box in R^n with the origin always a node.

    Continuity and jump measurements are anchored at the origin, so the
    requested box is snapped outward to the lattice h*Z^n.
    """

    def __init__(self, lo, hi, h: float):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if h <= 0:
            raise DomainError(f"grid spacing must be positive, got {h}")
        if np.any(hi <= lo):
            raise DomainError("grid box must have positive extent on every axis")
        self.h = float(h)
        self.ndim = lo.size
        self.lo_index = np.floor(lo / h + 1e-12).astype(np.int64)
        hi_index = np.ceil(hi / h - 1e-12).astype(np.int64)
        self.shape = tuple(int(k) for k in (hi_index - self.lo_index + 1))
        self.lo = self.lo_index * self.h

    @classmethod
    def from_box(cls, lo, hi, cells: int) -> "UniformGrid":
        """Grid with `cells` intervals across the widest axis of the box."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        h = float(np.max(hi - lo)) / int(cells)
        return cls(lo, hi, h)

    @property
    def hi(self):
        return self.lo + self.h * (np.asarray(self.shape) - 1)

    def axes(self):
        return [self.lo[d] + self.h * np.arange(self.shape[d]) for d in range(self.ndim)]

    def nodes(self):
        """All node coordinates, shape (prod(shape), ndim), C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def index_of(self, x):
        """Exact node index of a lattice point (error if off-lattice)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.rint(x / self.h).astype(np.int64) - self.lo_index
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            raise DomainError(f"point {x} is outside the grid")
        node = self.lo + idx * self.h
        if not np.allclose(node, x, atol=1e-9 * self.h):
            raise DomainError(f"point {x} is not a grid node (h={self.h})")
        return tuple(int(i) for i in idx)

    def coords_of(self, idx):
        return self.lo + np.asarray(idx, dtype=float) * self.h

    def origin_index(self):
        return tuple(int(i) for i in -self.lo_index)


@dataclass(frozen=True)
class TangentDisk:
    """Closed disk used as the inward-tangent set S (tangent to d-omega at 0)."""

    center: tuple
    radius: float

    def level(self, x):
        """Positive inside S, zero on the boundary circle."""
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center, dtype=float)
        return self.radius - np.sqrt((d * d).sum(axis=-1))

    def contains(self, x):
        return self.level(x) > 0.0


def _box_margin(x, box_lo, box_hi):
    """Signed distance-to-box-face, positive inside the box (sup-norm style)."""
    x = np.asarray(x, dtype=float)
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    m = np.minimum(x - lo, hi - x)
    return m.min(axis=-1)


class PlanarDomain:
    """Base domain with a kind-specific level function (positive inside).

    Kinds:
      wedge                   {x2 > c |x1|^beta} near 0, ray-continued, box-clipped
      reentrant               polygon with one concave corner at the origin
      interval                (a, b) in R (n = 1)
      smooth-with-tangent     flat C^infty boundary through 0 with inward disk S
    Classification uses the level function; `band` widens the boundary set
    symmetrically (band = 0 keeps only exact zeros on the boundary).
    """

    def __init__(self, kind, ndim, level_fn, box_lo, box_hi, meta):
        self.kind = kind
        self.ndim = ndim
        self._level = level_fn
        self.box_lo = np.atleast_1d(np.asarray(box_lo, dtype=float))
        self.box_hi = np.atleast_1d(np.asarray(box_hi, dtype=float))
        self.meta = dict(meta)

    def level(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self._level(x[None, :])[0])
        return self._level(x)

    def classify(self, x, band: float = 0.0) -> Membership:
        lev = self.level(np.asarray(x, dtype=float))
        if abs(lev) <= band:
            return Membership.BOUNDARY
        return Membership.INTERIOR if lev > 0 else Membership.EXTERIOR

    def classify_nodes(self, points, band: float = 0.0):
        """Vectorized interior mask (strictly positive level beyond the band)."""
        lev = self._level(np.asarray(points, dtype=float))
        return lev > band

    @property
    def tangent_disk(self) -> TangentDisk | None:
        return self.meta.get("tangent_disk")

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        for key, val in self.meta.items():
            if key == "tangent_disk" and val is not None:
                cfg["tangent_disk_center"] = " ".join(repr(float(c)) for c in val.center)
                cfg["tangent_disk_radius"] = repr(float(val.radius))
            elif key == "vertices":
                cfg["vertices"] = "; ".join(
                    " ".join(repr(float(c)) for c in v) for v in val
                )
            elif np.isscalar(val):
                cfg[key] = repr(float(val))
        cfg["box"] = " ".join(
            repr(float(v)) for v in np.concatenate([self.box_lo, self.box_hi])
        )
        return cfg


def make_wedge_domain(c: float, beta: float, rho: float, box) -> PlanarDomain:
    """Wedge omega = {x2 > c |x1|^beta} inside B_rho, ray-continued outside.

    The boundary curve keeps its power-law profile for |x1| <= rho and is
    extended by the tangent ray beyond, so the set agrees with the power-law
    wedge on all of B_rho while staying box-bounded.
    """
    if not (c > 0 and beta > 0 and rho > 0):
        raise DomainError(f"wedge parameters must be positive, got c={c}, beta={beta}, rho={rho}")
    box_lo, box_hi = _parse_box(box, 2)
    slope = c * beta * rho ** (beta - 1.0)
    edge = c * rho ** beta

    def phi_ext(x1):
        a = np.abs(x1)
        return np.where(a <= rho, c * a ** beta, edge + slope * (a - rho))

    def level(pts):
        curve = pts[:, 1] - phi_ext(pts[:, 0])
        return np.minimum(curve, _box_margin(pts, box_lo, box_hi))

    meta = {"c": c, "beta": beta, "rho": rho}
    return PlanarDomain("wedge", 2, level, box_lo, box_hi, meta)


def make_reentrant_domain(angle: float, box, tangent_radius: float | None = None) -> PlanarDomain:
    """Polygon with a concave corner of interior angle `angle` at the origin.

    The two corner edges leave the origin along directions theta = 0 and
    theta = angle; the interior occupies the angular sector (0, angle), so
    any angle in (pi, 2*pi) makes the corner reentrant.  A disk tangent to
    the corner from inside (centered on the bisector) is attached as the
    inward C^{1,alpha} set S.
    """
    if not (math.pi < angle < 2.0 * math.pi):
        raise DomainError(f"reentrant corner angle must lie in (pi, 2pi), got {angle}")
    box_lo, box_hi = _parse_box(box, 2)
    half_width = float(min(box_hi - np.zeros(2)))
    if tangent_radius is None:
        tangent_radius = 0.3 * half_width
    bisector = np.array([math.cos(angle / 2.0), math.sin(angle / 2.0)])
    disk = TangentDisk(
        tuple(float(c) for c in tangent_radius * bisector), float(tangent_radius)
    )
    vertices = _reentrant_vertices(angle, box_lo, box_hi)

    def level(pts):
        return _polygon_signed_distance(pts, vertices)

    meta = {"angle": angle, "vertices": vertices, "tangent_disk": disk}
    return PlanarDomain("reentrant", 2, level, box_lo, box_hi, meta)


def make_interval_domain(a: float, b: float, box=None) -> PlanarDomain:
    """1-D base domain omega = (a, b)."""
    if not b > a:
        raise DomainError(f"interval needs a < b, got ({a}, {b})")
    if box is None:
        pad = 0.5 * (b - a)
        box = ([a - pad], [b + pad])
    box_lo, box_hi = _parse_box(box, 1)

    def level(pts):
        x = pts[:, 0]
        return np.minimum(x - a, b - x)

    return PlanarDomain("interval", 1, level, box_lo, box_hi, {"a": a, "b": b})


def make_smooth_tangent_domain(
    disk_radius: float, box, alpha: float, boundary_height: float = 0.0
) -> PlanarDomain:
    """Half-plane-like omega = {x2 > boundary_height} with an inward tangent disk at 0.

    The boundary is flat (C^infty, hence C^{1,alpha} for every alpha), and
    S is the disk of the given radius tangent to it at the origin.
    """
    if not disk_radius > 0:
        raise DomainError("tangent disk radius must be positive")
    box_lo, box_hi = _parse_box(box, 2)
    disk = TangentDisk((0.0, boundary_height + disk_radius), disk_radius)

    def level(pts):
        return np.minimum(pts[:, 1] - boundary_height, _box_margin(pts, box_lo, box_hi))

    meta = {"alpha": alpha, "disk_radius": disk_radius, "tangent_disk": disk}
    return PlanarDomain("smooth-with-tangent", 2, level, box_lo, box_hi, meta)


def _parse_box(box, ndim):
    if isinstance(box, (tuple, list)) and len(box) == 2:
        lo, hi = box
    else:
        arr = np.asarray(box, dtype=float).ravel()
        lo, hi = arr[:ndim], arr[ndim:]
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.size != ndim or hi.size != ndim:
        raise DomainError(f"box must have {ndim} coordinates per corner")
    if np.any(hi <= lo):
        raise DomainError("box upper corner must exceed lower corner")
    return lo, hi


def _reentrant_vertices(angle, box_lo, box_hi):
    """Trace the polygon: origin -> edge-1 exit -> box corners (ccw) -> edge-2 exit."""
    p_a = _ray_box_exit(np.array([1.0, 0.0]), box_lo, box_hi)
    dir2 = np.array([math.cos(angle), math.sin(angle)])
    p_b = _ray_box_exit(dir2, box_lo, box_hi)
    corners = [
        np.array([box_hi[0], box_hi[1]]),
        np.array([box_lo[0], box_hi[1]]),
        np.array([box_lo[0], box_lo[1]]),
        np.array([box_hi[0], box_lo[1]]),
    ]
    verts = [np.zeros(2), p_a]
    ang_a = _box_perimeter_angle(p_a, box_lo, box_hi)
    ang_b = _box_perimeter_angle(p_b, box_lo, box_hi)
    for corner in corners:
        ang_c = _box_perimeter_angle(corner, box_lo, box_hi)
        if (ang_c - ang_a) % (2 * math.pi) < (ang_b - ang_a) % (2 * math.pi):
            verts.append(corner)
    verts.append(p_b)
    return [tuple(float(c) for c in v) for v in verts]


def _ray_box_exit(direction, box_lo, box_hi):
    t = np.inf
    for d in range(2):
        if direction[d] > 1e-15:
            t = min(t, box_hi[d] / direction[d])
        elif direction[d] < -1e-15:
            t = min(t, box_lo[d] / direction[d])
    return direction * t


def _box_perimeter_angle(p, box_lo, box_hi):
    center = 0.5 * (np.asarray(box_lo) + np.asarray(box_hi))
    v = np.asarray(p) - center
    return math.atan2(v[1], v[0])


def _polygon_signed_distance(pts, vertices):
    """Signed distance to a polygon boundary, positive inside (even-odd rule)."""
    pts = np.asarray(pts, dtype=float)
    verts = np.asarray(vertices, dtype=float)
    a = verts
    b = np.roll(verts, -1, axis=0)
    # distance to each segment
    dmin = np.full(pts.shape[0], np.inf)
    inside = np.zeros(pts.shape[0], dtype=bool)
    for va, vb in zip(a, b):
        e = vb - va
        w = pts - va
        ee = float(e @ e)
        t = np.clip((w @ e) / ee, 0.0, 1.0) if ee > 0 else np.zeros(pts.shape[0])
        proj = va + t[:, None] * e
        d = np.linalg.norm(pts - proj, axis=1)
        dmin = np.minimum(dmin, d)
        # even-odd crossing test on the horizontal ray
        cond = (va[1] > pts[:, 1]) != (vb[1] > pts[:, 1])
        denom = vb[1] - va[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = va[0] + (pts[:, 1] - va[1]) * (vb[0] - va[0]) / denom
        inside ^= cond & (pts[:, 0] < x_cross)
    scale = float(np.abs(verts).max()) + 1.0
    dmin[dmin < 1e-12 * scale] = 0.0  # points on an edge classify as boundary
    return np.where(inside, dmin, -dmin)


_DOMAIN_BUILDERS = {
    "wedge": lambda cfg, box: make_wedge_domain(
        float(cfg["c"]), float(cfg["beta"]), float(cfg["rho"]), box
    ),
    "reentrant": lambda cfg, box: make_reentrant_domain(
        float(cfg["angle"]),
        box,
        float(cfg["tangent_disk_radius"]) if "tangent_disk_radius" in cfg else None,
    ),
    "interval": lambda cfg, box: make_interval_domain(
        float(cfg["a"]), float(cfg["b"]), box
    ),
    "smooth-with-tangent": lambda cfg, box: make_smooth_tangent_domain(
        float(cfg["disk_radius"]), box, float(cfg["alpha"])
    ),
}


def domain_from_config(cfg: dict) -> PlanarDomain:
    """Rebuild a domain from its flat text description (kind + parameters)."""
    kind = cfg["kind"]
    if kind not in _DOMAIN_BUILDERS:
        raise DomainError(f"unknown domain kind {kind!r}")
    vals = [float(v) for v in cfg["box"].split()]
    ndim = len(vals) // 2
    box = (vals[:ndim], vals[ndim:])
    return _DOMAIN_BUILDERS[kind](cfg, box)
