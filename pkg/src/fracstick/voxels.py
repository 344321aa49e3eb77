"""Voxelized subsets of R^(n+1) with midpoint classification.

A VoxelSet is a uniform lattice of cells; a cell belongs to the set iff
the continuum set contains its center.  Sets are either explicit (a bool
array over a box, used by the energy sums) or implicit (the indicator is
evaluated at snapped centers on demand, which lets principal-value
quadrature resolve surfaces far below any storable resolution).
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError

__all__ = [
    "VoxelSet",
    "voxelize",
    "implicit_set",
    "halfspace_fn",
    "ball_fn",
    "subgraph_fn",
]


class VoxelSet:
    """Midpoint-classified voxel set; explicit (array) or implicit (callable)."""

    def __init__(self, origin, h: float, data=None, fn: Callable = None, shape=None):
        if (data is None) == (fn is None):
            raise DomainError("provide exactly one of data / fn")
        self.h = float(h)
        self.origin = np.atleast_1d(np.asarray(origin, dtype=float))
        self.ndim = self.origin.size
        self.data = None
        self.fn = fn
        if data is not None:
            data = np.asarray(data, dtype=bool)
            self.data = data
            self.shape = data.shape
        else:
            self.shape = tuple(shape) if shape is not None else None

    @property
    def is_explicit(self) -> bool:
        return self.data is not None

    def snap_centers(self, points):
        """Centers of the voxels containing the given points."""
        points = np.asarray(points, dtype=float)
        rel = (points - self.origin) / self.h
        return self.origin + (np.floor(rel) + 0.5) * self.h

    def contains(self, points):
        """Indicator at the voxels containing `points` (False outside an explicit box)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.fn is not None:
            return np.asarray(self.fn(self.snap_centers(points)), dtype=bool)
        idx = np.floor((points - self.origin) / self.h).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)
        out = np.zeros(points.shape[0], dtype=bool)
        if np.any(inside):
            sel = tuple(idx[inside].T)
            out[inside] = self.data[sel]
        return out

    def covers_ball(self, center, radius: float) -> bool:
        """Whether the explicit box contains the closed ball (implicit sets: always)."""
        if self.fn is not None:
            return True
        center = np.asarray(center, dtype=float)
        hi = self.origin + self.h * np.asarray(self.shape)
        return bool(np.all(center - radius >= self.origin) and np.all(center + radius <= hi))

    def centers(self):
        """All voxel-center coordinates of an explicit set's grid."""
        if self.data is None:
            raise DomainError("implicit voxel sets have no materialized centers")
        axes = [
            self.origin[d] + self.h * (np.arange(self.shape[d]) + 0.5)
            for d in range(self.ndim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def occupied_centers(self):
        return self.centers()[self.data.ravel()]

    def count(self) -> int:
        return int(self.data.sum())

    def complement(self) -> "VoxelSet":
        if self.data is not None:
            return VoxelSet(self.origin, self.h, data=~self.data)
        fn = self.fn
        return VoxelSet(self.origin, self.h, fn=lambda p: ~np.asarray(fn(p), dtype=bool))

    def same_lattice(self, other: "VoxelSet") -> bool:
        return (
            self.is_explicit
            and other.is_explicit
            and self.shape == other.shape
            and abs(self.h - other.h) < 1e-12 * self.h
            and np.allclose(self.origin, other.origin, atol=1e-12 * self.h)
        )


def voxelize(fn: Callable, lo, hi, h: float, align_point=None) -> VoxelSet:
    """Materialize the midpoint classification of `fn` over a box.

    With `align_point` given, the lattice is shifted so that point lies on
    voxel faces in every coordinate (so a surface through it is resolved by
    a face, not interior to a cell).
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    origin = lo.copy()
    if align_point is not None:
        ap = np.asarray(align_point, dtype=float)
        origin = ap + np.floor((lo - ap) / h) * h
    shape = np.ceil((hi - origin) / h - 1e-12).astype(np.int64)
    vs = VoxelSet(origin, h, data=np.zeros(tuple(shape), dtype=bool))
    centers = vs.centers()
    vs.data = np.asarray(fn(centers), dtype=bool).reshape(vs.shape)
    return vs


def implicit_set(fn: Callable, h: float, align_point=None, ndim: int = None) -> VoxelSet:
    """Implicit midpoint-classified set; `align_point` fixes the lattice phase."""
    if align_point is None:
        if ndim is None:
            raise DomainError("implicit_set needs align_point or ndim")
        origin = np.zeros(ndim)
    else:
        origin = np.asarray(align_point, dtype=float)
    return VoxelSet(origin, h, fn=fn)


def halfspace_fn(level: float = 0.0) -> Callable:
    """Indicator of {x_d < level} (the subgraph of a constant)."""
    return lambda p: p[:, -1] < level


def ball_fn(center, radius: float) -> Callable:
    center = np.asarray(center, dtype=float)
    return lambda p: ((p - center) ** 2).sum(axis=1) < radius * radius


def subgraph_fn(height_fn: Callable) -> Callable:
    """Indicator of {x_d < u(x_1..x_{d-1})} for a vectorized base-height callable."""
    return lambda p: p[:, -1] < np.asarray(height_fn(p[:, :-1]), dtype=float)
