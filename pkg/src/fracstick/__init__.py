"""Fractional-perimeter minimal graphs in cylinders.

Numerical machinery for nonlocal minimal graphs over planar (or 1-D)
base domains: slope-kernel evaluation, graph and principal-value
curvature quadrature, interaction energies, a monotone nodewise solver,
barrier certification, and boundary-behavior experiments (continuity at
outward corners, stickiness at inward-tangent boundary points).
"""

from .analysis import DichotomyResult, StickinessReport, continuity_modulus, measure_jump, wedge_integral_partial
from .barriers import BarrierSpec, build_v, build_w, certify_negative, curvature_bound_w
from .curvature import CurvatureEvaluator, CurvatureSample, curvature_scaling_check, graph_curvature, set_curvature_pv
from .errors import DivergedError, DomainError, FracstickError, PreconditionError, ResolutionError
from .geometry import (
    CylinderBox,
    Membership,
    PlanarDomain,
    TangentDisk,
    UniformGrid,
    make_interval_domain,
    make_reentrant_domain,
    make_smooth_tangent_domain,
    make_wedge_domain,
)
from .graphfn import ExteriorDatum, GraphFunction, datum_bump, datum_constant, datum_windowed_tanh, datum_zero
from .kernel import FastF, eval_F, eval_F_infinity, exterior_tail_bound, get_fast_F
from .params import FractionalParams
from .perimeter import PerimeterResult, energy_delta_remove, fractional_perimeter, interaction
from .solver import SolveReport, SolverConfig, comparison_check, solve_minimal_graph, subsolution_check
from .voxels import VoxelSet, ball_fn, halfspace_fn, implicit_set, subgraph_fn, voxelize

__version__ = "0.1.0"
