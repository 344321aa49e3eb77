"""Barrier construction and numerical certification.

Three pieces, all living over the inward-tangent disk S:

* w       — (signed offset from the S-boundary graph) * (radial cutoff on
            B_rho), nonnegative on S, nonpositive outside, gradient of
            norm 1 at the corner.
* w_plus  — its positive part; the graph of eps * w_plus has curvature
            bounded above by C * (holder_norm * eps)^(s/alpha), where C is
            an explicit constant assembled from the kernel surface areas
            and the truncation radius R(eps) = (holder_norm * eps)^(-1/alpha).
* v       — eps^gamma * (plateau bump on B_1(p0)) + eps * w_plus with
            gamma in (0, s/alpha): the detached bump slab contributes a
            negative curvature term ~ eps^gamma that beats the w-term for
            small eps, making the curvature strictly negative on the
            S-part of the boundary; the certificate samples it.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .curvature import CurvatureEvaluator
from .errors import DomainError, ResolutionError
from .geometry import TangentDisk, UniformGrid
from .graphfn import ExteriorDatum, GraphFunction, plateau_bump
from .kernel import eval_F_infinity, sphere_area
from .params import FractionalParams

__all__ = [
    "BarrierSpec",
    "build_w",
    "holder_norm_estimate",
    "curvature_bound_w",
    "build_v",
    "certify_negative",
    "BoundReport",
    "NegativityReport",
]


@dataclass(frozen=True)
class BarrierSpec:
    """Geometry and exponents of the barrier family.

    disk       the inward-tangent set S (tangent to the domain boundary at 0)
    alpha      gradient-Hoelder exponent attributed to S's boundary graph
    rho        cutoff radius: w vanishes outside B_rho (needs rho <= disk radius / 2)
    epsilon    graph amplitude
    gamma      bump-height exponent, strictly inside (0, s/alpha)
    p0         center of the unit bump ball; closure must avoid closure(omega)
    grid       sampling grid for the fields
    holder_norm  filled by build_w (finite-difference estimate)
    """

    disk: TangentDisk
    alpha: float
    rho: float
    epsilon: float
    gamma: float
    p0: tuple
    grid: UniformGrid
    holder_norm: float | None = None
    bump_sign: float = 1.0  # -1 flips the detached bump: the negative control

    def validate(self, params: FractionalParams, omega_far_corner: float | None = None):
        s = params.s
        if not (s < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (s, 1) = ({s}, 1), got {self.alpha}")
        if not (0.0 < self.gamma < s / self.alpha):
            raise DomainError(
                f"gamma must lie strictly in (0, s/alpha) = (0, {s/self.alpha}), got {self.gamma}"
            )
        if not (0.0 < self.rho <= 0.5 * self.disk.radius):
            raise DomainError("rho must lie in (0, disk radius / 2]")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")

    # -- analytic fields -------------------------------------------------
    def _frame(self):
        center = np.asarray(self.disk.center, dtype=float)
        nrm = float(np.linalg.norm(center))
        axis = center / nrm
        perp = np.array([-axis[1], axis[0]])
        return axis, perp

    def w_values(self, pts):
        """w = (offset above the disk's boundary arc) * cutoff(|x| / rho)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r_s = self.disk.radius
        axis, perp = self._frame()
        xi_n = pts @ axis
        xi_t = pts @ perp
        arc = r_s - np.sqrt(np.maximum(r_s * r_s - np.minimum(xi_t * xi_t, r_s * r_s), 0.0))
        cut = plateau_bump(np.linalg.norm(pts, axis=1) / self.rho)
        return (xi_n - arc) * cut

    def w_plus_values(self, pts):
        return np.maximum(self.w_values(pts), 0.0)

    def bump_values(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts - np.asarray(self.p0, dtype=float), axis=1)
        return plateau_bump(r)

    def v_values(self, pts):
        bump = self.bump_sign * self.epsilon**self.gamma * self.bump_values(pts)
        return bump + self.epsilon * self.w_plus_values(pts)

    # -- graphs ----------------------------------------------------------
    def w_plus_graph(self, scale: float) -> GraphFunction:
        fn = lambda q: scale * self.w_plus_values(q)
        datum = ExteriorDatum(
            fn=fn,
            bound=abs(scale) * float(self.w_plus_values(self.grid.nodes()).max() + 1e-15),
            support_radius=self.rho,
            description={"kind": "barrier-w-plus"},
        )
        return GraphFunction.from_callable(self.grid, fn, datum=datum)

    def v_graph(self) -> GraphFunction:
        fn = lambda q: self.v_values(q)
        bound = self.epsilon ** self.gamma + self.epsilon * float(
            self.w_plus_values(self.grid.nodes()).max() + 1e-15
        )
        datum = ExteriorDatum(
            fn=fn,
            bound=bound,
            support_radius=float(np.linalg.norm(self.p0)) + 1.0,
            description={"kind": "barrier-v"},
        )
        return GraphFunction.from_callable(self.grid, fn, datum=datum)


def build_w(spec: BarrierSpec):
    """Sample w on the grid and verify its defining sign/gradient structure.

    Returns (values, info) where info reports sign violations on the grid,
    the finite-difference |grad w(0)| (expected >= 1 up to O(h)), and the
    Hoelder-norm estimate (also stored for bound evaluation).
    """
    grid = spec.grid
    h = grid.h
    if h > 0.25 * spec.rho:
        raise ResolutionError(f"grid spacing {h} too coarse for rho = {spec.rho}")
    pts = grid.nodes()
    vals = spec.w_values(pts).reshape(grid.shape)
    inside = spec.disk.level(pts) > 0
    w_flat = vals.ravel()
    sign_violations = int(((w_flat < -1e-12) & inside).sum() + ((w_flat > 1e-12) & ~inside).sum())
    axis, _ = spec._frame()
    step = h * axis
    grad0 = (spec.w_values(step[None, :])[0] - spec.w_values(-step[None, :])[0]) / (2 * h)
    norm_est = holder_norm_estimate(spec)
    info = {
        "sign_violations": sign_violations,
        "grad_at_origin": abs(float(grad0)),
        "holder_norm": norm_est,
        "w_origin": float(spec.w_values(np.zeros((1, 2)))[0]),
    }
    return vals, info


def holder_norm_estimate(spec: BarrierSpec, max_pairs: int = 1500) -> float:
    """max(sup|w|, sup|grad w|, sup gradient-Hoelder quotient) on B_rho nodes.

    Gradients by central differences; the alpha-quotient is maximized over
    all pairs of a deterministic subsample of B_rho nodes.
    """
    grid = spec.grid
    h = grid.h
    pts = grid.nodes()
    sel = np.linalg.norm(pts, axis=1) <= spec.rho + 2 * h
    pts = pts[sel]
    if pts.shape[0] == 0:
        raise ResolutionError("no grid nodes inside the cutoff ball")
    if pts.shape[0] > max_pairs:
        stride = int(math.ceil(pts.shape[0] / max_pairs))
        pts = pts[::stride]
    w0 = spec.w_values(pts)
    gx = (spec.w_values(pts + [h, 0.0]) - spec.w_values(pts - [h, 0.0])) / (2 * h)
    gy = (spec.w_values(pts + [0.0, h]) - spec.w_values(pts - [0.0, h])) / (2 * h)
    grads = np.stack([gx, gy], axis=1)
    sup_w = float(np.abs(w0).max())
    sup_g = float(np.linalg.norm(grads, axis=1).max())
    diff_g = grads[:, None, :] - grads[None, :, :]
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    quot = np.linalg.norm(diff_g, axis=2) / dist**spec.alpha
    return max(sup_w, sup_g, float(quot.max()))


@dataclass(frozen=True)
class BoundReport:
    """Per-epsilon certified bound and curvature samples of the w_plus graph."""

    epsilon: float
    bound: float
    r_star: float
    holder_norm: float
    samples: list  # CurvatureSample with certified_upper set
    all_below_bound: bool

    @property
    def max_certified(self) -> float:
        return max(s.certified_upper for s in self.samples)

    @property
    def max_value(self) -> float:
        return max(s.value for s in self.samples)


def bound_constant(params: FractionalParams, alpha: float) -> tuple:
    """(near, far) pieces of the explicit bound constant.

    near * ||w|| eps * R^(alpha-s) bounds the gradient-Hoelder remainder on
    B_R; far * R^(-s) bounds the two bounded F-terms outside.  Both carry
    the ambient column factor 2.
    """
    s = params.s
    varsigma = sphere_area(params.n)
    amb = CurvatureEvaluator.AMBIENT_FACTOR
    near = amb * varsigma / ((alpha - s) * (1.0 + alpha))
    far = amb * 2.0 * eval_F_infinity(params) * varsigma / s
    return near, far


def curvature_bound_w(
    spec: BarrierSpec, params: FractionalParams, lattice_radius: float = None
) -> BoundReport:
    """Evaluate the explicit curvature bound for the eps*w_plus graph.

    The proof chain truncates at R(eps) = (||w|| eps)^(-1/alpha); with the
    explicit constants from `bound_constant` the bound collapses to
    (near/||w|| + far) * (||w|| eps)^(s/alpha).  Sample curvatures are taken
    at every S-node inside B_rho, certified by closing the quadrature with
    the worst-case far cap at R(eps).
    """
    spec.validate(params)
    norm = spec.holder_norm if spec.holder_norm is not None else holder_norm_estimate(spec)
    eps = spec.epsilon
    r_star = (norm * eps) ** (-1.0 / spec.alpha)
    near_c, far_c = bound_constant(params, spec.alpha)
    bound = near_c * norm * eps * r_star ** (spec.alpha - params.s) + far_c * r_star ** (
        -params.s
    )
    graph = spec.w_plus_graph(eps)
    if lattice_radius is None:
        lattice_radius = 2.0 * spec.rho + float(np.max(spec.grid.hi - spec.grid.lo))
    lattice_radius = max(lattice_radius, 4.0 * spec.grid.h)
    ev = CurvatureEvaluator(graph, params, lattice_radius)
    pts = spec.grid.nodes()
    inside = (spec.disk.level(pts) > 0) & (np.linalg.norm(pts, axis=1) < spec.rho) & (
        spec.w_values(pts) > 1e-12
    )
    idx = np.argwhere(inside.reshape(spec.grid.shape))
    samples = [ev.certified_sample_at(tuple(i), r_star) for i in idx]
    ok = all(s.certified_upper <= bound for s in samples)
    return BoundReport(eps, bound, r_star, norm, samples, ok)


@dataclass(frozen=True)
class NegativityReport:
    epsilon: float
    certified: bool
    max_curvature: float
    samples: list
    v_bound: float
    covering_violations: int  # nodes where v < eps * w_plus (expected none)
    slab_nodes: int
    slab_nodes_expected: int
    margin_coeff_slab: float
    margin_coeff_bound: float

    def margin_model(self, eps: float) -> float:
        """Model lower bound: slab gain minus graph-term bound at amplitude eps."""
        return self.margin_coeff_slab * eps - self.margin_coeff_bound


def build_v(
    spec: BarrierSpec,
    params: FractionalParams,
    sample_mask=None,
    quadrature_radius: float = None,
) -> tuple:
    """Assemble v = eps^gamma * bump + eps * w_plus and sample its curvature.

    Returns (v GraphFunction, NegativityReport).  Certification requires
    every sampled curvature on the S-part of the graph boundary to be
    strictly negative; inclusion checks (v >= eps w_plus; the bump slab
    B_{1/2}(p0) x [0, eps^gamma) filled) are counted on grid nodes.
    """
    spec.validate(params)
    grid = spec.grid
    eps = spec.epsilon
    v = spec.v_graph()
    pts = grid.nodes()
    v_flat = v.values.ravel()
    w_plus_flat = eps * spec.w_plus_values(pts)
    covering_violations = int((v_flat < w_plus_flat - 1e-14).sum())

    bump_dist = np.linalg.norm(pts - np.asarray(spec.p0, dtype=float), axis=1)
    in_half_ball = bump_dist < 0.5
    slab_nodes = int((v_flat[in_half_ball] >= eps**spec.gamma - 1e-14).sum())
    slab_expected = int(in_half_ball.sum())

    if sample_mask is None:
        sample_mask = (spec.disk.level(pts) > 0) & (spec.w_values(pts) > 1e-12)
    idx = np.argwhere(np.asarray(sample_mask).reshape(grid.shape))
    if quadrature_radius is None:
        quadrature_radius = float(np.linalg.norm(spec.p0)) + 1.0 + float(
            np.max(grid.hi - grid.lo)
        )
    ev = CurvatureEvaluator(v, params, quadrature_radius)
    samples = [ev.sample_at(tuple(i)) for i in idx]
    max_curv = max(s.value for s in samples) if samples else math.inf

    # explicit margin model: slab term c * eps^gamma vs graph-term bound
    norm = spec.holder_norm if spec.holder_norm is not None else holder_norm_estimate(spec)
    near_c, far_c = bound_constant(params, spec.alpha)
    bound_w_term = (near_c / norm + far_c) * (norm * eps) ** (params.s / spec.alpha)
    d = params.ambient_dim
    half_ball_vol = math.pi * 0.25 if params.n == 2 else 1.0  # area of B_{1/2} in R^n
    d_max = max(
        float(np.linalg.norm(np.asarray(p) - np.asarray(spec.p0))) + 0.5 + 1.0
        for p in (pts[np.asarray(sample_mask)] if np.asarray(sample_mask).any() else [np.zeros(2)])
    )
    amb = CurvatureEvaluator.AMBIENT_FACTOR
    slab_coeff = half_ball_vol * d_max ** (-(d + params.s))
    report = NegativityReport(
        epsilon=eps,
        certified=bool(samples) and max_curv < 0.0,
        max_curvature=max_curv,
        samples=samples,
        v_bound=float(np.abs(v.values).max()),
        covering_violations=covering_violations,
        slab_nodes=slab_nodes,
        slab_nodes_expected=slab_expected,
        margin_coeff_slab=slab_coeff,
        margin_coeff_bound=bound_w_term,
    )
    return v, report


def certify_negative(
    spec: BarrierSpec, params: FractionalParams, k_max: int = 14, k_min: int = 1
) -> tuple:
    """Largest eps = 2^-k with a fully negative curvature certificate.

    Returns (eps_star or None, reports): walks k = k_min..k_max and stops
    at the first certified level (the slab term only strengthens as eps
    shrinks, so the first success is the scale of interest).
    """
    reports = []
    for k in range(k_min, k_max + 1):
        candidate = replace(spec, epsilon=2.0 ** (-k))
        _, rep = build_v(candidate, params)
        reports.append(rep)
        if rep.certified:
            return rep.epsilon, reports
    return None, reports
