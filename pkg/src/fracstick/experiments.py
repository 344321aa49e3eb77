"""Experiment configurations, validation, and the pipeline runner.

Configs are flat INI text (diff-able, hand-editable); `validate` returns
every hypothesis violation as a sentence, `run_experiment` executes the
pipeline and writes, per resolution, a solution CSV plus one JSON report
and a summary table.  Data files carry no timestamps and use fixed float
formatting, so reruns with identical configs are byte-identical.
"""

import configparser
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import barriers
from .analysis import continuity_modulus, measure_jump, wedge_integral_partial
from .curvature import CurvatureEvaluator, samples_to_csv_rows, set_curvature_pv
from .errors import DomainError, FracstickError
from .geometry import PlanarDomain, UniformGrid, domain_from_config
from .graphfn import ExteriorDatum, GraphFunction, datum_from_config, smoothstep
from .params import FractionalParams
from .solver import SolverConfig, solve_minimal_graph, subsolution_check
from .voxels import implicit_set, subgraph_fn

__all__ = ["ExperimentConfig", "load_config", "validate", "run_experiment", "crossval"]

EXPERIMENT_KINDS = (
    "convex-corner",
    "reentrant-stickiness",
    "barrier-certify",
    "dichotomy",
    "oracle-crossval",
)


@dataclass
class ExperimentConfig:
    kind: str
    output_dir: str
    params: FractionalParams
    domain_cfg: dict = field(default_factory=dict)
    datum_cfg: dict = field(default_factory=dict)
    resolutions: list = field(default_factory=list)
    grid_box: tuple | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    barrier_cfg: dict = field(default_factory=dict)
    analysis_cfg: dict = field(default_factory=dict)
    dichotomy_cfg: dict = field(default_factory=dict)
    seed: int = 0

    def domain(self) -> PlanarDomain:
        return domain_from_config(self.domain_cfg)

    def datum(self) -> ExteriorDatum:
        return datum_from_config(self.datum_cfg)


def load_config(path_or_text) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    if os.path.exists(str(path_or_text)):
        parser.read(path_or_text)
    else:
        parser.read_string(str(path_or_text))
    exp = parser["experiment"]
    prm = parser["params"]
    params = FractionalParams(int(prm["n"]), float(prm["s"]))
    grid_sec = parser["grid"] if parser.has_section("grid") else {}
    resolutions = [int(v) for v in grid_sec.get("resolutions", "").split()] if grid_sec else []
    grid_box = None
    if grid_sec and "box" in grid_sec:
        vals = [float(v) for v in grid_sec["box"].split()]
        nd = len(vals) // 2
        grid_box = (vals[:nd], vals[nd:])
    solver_kwargs = {}
    if parser.has_section("solver"):
        sv = parser["solver"]
        solver_kwargs = dict(
            tolerance=float(sv.get("tolerance", "1e-4")),
            max_iterations=int(sv.get("max_iterations", "200")),
            damping=float(sv.get("damping", "0.5")),
            scheme=sv.get("scheme", "nodewise-root"),
            quadrature_radius=float(sv.get("quadrature_radius", "4.0")),
            workers=int(sv.get("workers", "1")),
            accel_window=int(sv.get("accel_window", "6")),
        )
    env_workers = os.environ.get("FRACSTICK_WORKERS")
    if env_workers:
        solver_kwargs["workers"] = int(env_workers)
    return ExperimentConfig(
        kind=exp["kind"],
        output_dir=exp.get("output_dir", "fracstick-out"),
        params=params,
        domain_cfg=dict(parser["domain"]) if parser.has_section("domain") else {},
        datum_cfg=dict(parser["datum"]) if parser.has_section("datum") else {},
        resolutions=resolutions,
        grid_box=grid_box,
        solver=SolverConfig(**solver_kwargs) if solver_kwargs else SolverConfig(),
        barrier_cfg=dict(parser["barrier"]) if parser.has_section("barrier") else {},
        analysis_cfg=dict(parser["analysis"]) if parser.has_section("analysis") else {},
        dichotomy_cfg=dict(parser["dichotomy"]) if parser.has_section("dichotomy") else {},
        seed=int(exp.get("seed", "0")),
    )


def validate(config: ExperimentConfig) -> list:
    """Every invariant violation, phrased against the hypothesis it breaks."""
    v = []
    if config.kind not in EXPERIMENT_KINDS:
        v.append(f"unknown experiment kind {config.kind!r}")
        return v
    s = config.params.s
    if config.resolutions and any(
        b <= a for a, b in zip(config.resolutions, config.resolutions[1:])
    ):
        v.append("grid resolutions must be strictly increasing")
    if config.kind in ("convex-corner",):
        beta = float(config.domain_cfg.get("beta", "1.0"))
        allow = config.dichotomy_cfg.get("allow_beta_above", "false").lower() == "true"
        if beta > s + 1.0 and not allow:
            v.append(
                f"outward-singularity exponent beta = {beta} exceeds s+1 = {s+1}: "
                "the wedge-slab kernel series converges there and boundary continuity "
                "is no longer forced (override with allow_beta_above = true)"
            )
        if beta <= 0:
            v.append("wedge exponent beta must be positive")
    if config.kind == "dichotomy":
        mu = float(config.dichotomy_cfg.get("mu", "0.125"))
        c = float(config.dichotomy_cfg.get("c", "0.5"))
        if not (0.0 < mu <= 0.125):
            v.append("dichotomy normalization requires mu in (0, 1/8]")
        if not (0.0 < c < 1.0):
            v.append("dichotomy normalization requires c in (0, 1)")
    if config.barrier_cfg:
        alpha = float(config.barrier_cfg.get("alpha", "0.9"))
        if not (s < alpha < 1.0):
            v.append(
                f"inward-tangency smoothness exponent alpha = {alpha} must exceed s = {s} "
                "(and stay below 1): the barrier construction needs the boundary of S "
                "to be strictly smoother than the interaction order"
            )
        gamma_frac = float(config.barrier_cfg.get("gamma_fraction", "0.5"))
        if not (0.0 < gamma_frac < 1.0):
            v.append(
                "bump exponent gamma must lie strictly inside (0, s/alpha): at the "
                "endpoint gamma = s/alpha the detached-bump gain no longer dominates "
                "the graph term for small amplitudes (gamma_fraction in (0,1))"
            )
        if "p0" in config.barrier_cfg and config.domain_cfg:
            p0 = np.array([float(x) for x in config.barrier_cfg["p0"].split()])
            try:
                dom = config.domain()
                pts = _closest_box_points(p0, dom.box_lo, dom.box_hi)
                if dom.level(pts).max() > -1e-12 and float(np.linalg.norm(p0 - pts)) <= 1.0:
                    v.append(
                        "the unit bump ball around p0 must keep its closure disjoint "
                        "from the closure of omega"
                    )
            except FracstickError:
                pass
    if config.kind in ("convex-corner", "reentrant-stickiness"):
        if not config.resolutions:
            v.append("solver experiments need a non-empty resolutions list")
        if config.solver.quadrature_radius <= 0:
            v.append("quadrature radius must be positive")
        if config.resolutions and config.grid_box is not None:
            width = max(
                hi - lo for lo, hi in zip(config.grid_box[0], config.grid_box[1])
            )
            h_finest = width / max(config.resolutions)
            if config.solver.quadrature_radius < 4.0 * h_finest:
                v.append("quadrature radius must be at least 4 grid spacings at every resolution")
    return v


def _closest_box_points(p0, lo, hi):
    return np.clip(p0, lo, hi)[None, :]


# ---------------------------------------------------------------------------
# serialization helpers (deterministic output)
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(x) for x in obj]
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.17g}")
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_json_ready(payload), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_solution_csv(path, u: GraphFunction):
    grid = u.grid
    nodes = grid.nodes()
    vals = u.values.ravel()
    mask = u.interior_mask.ravel().astype(int)
    with open(path, "w") as fh:
        cols = [f"x{d}" for d in range(grid.ndim)] + ["u", "interior"]
        fh.write(",".join(cols) + "\n")
        for row, val, m in zip(nodes, vals, mask):
            fh.write(",".join(_fmt(c) for c in row) + f",{_fmt(val)},{m}\n")


def _metric(value, module, quadrature_error):
    return {
        "value": float(value),
        "module": module,
        "quadrature_error": float(quadrature_error),
    }


def _prolong(u_coarse: GraphFunction, fine_grid: UniformGrid):
    from scipy.interpolate import RegularGridInterpolator

    interp = RegularGridInterpolator(
        u_coarse.grid.axes(), u_coarse.values, bounds_error=False, fill_value=None
    )
    return interp(fine_grid.nodes()).reshape(fine_grid.shape)


# ---------------------------------------------------------------------------
# experiment pipelines
# ---------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment; returns the process exit code (0 / 2 / 3)."""
    problems = validate(config)
    if problems:
        for p in problems:
            print(f"config error: {p}")
        return 3
    os.makedirs(config.output_dir, exist_ok=True)
    try:
        if config.kind == "dichotomy":
            return _run_dichotomy(config)
        if config.kind == "barrier-certify":
            return _run_barrier_certify(config)
        if config.kind == "oracle-crossval":
            return crossval(config.seed, config.output_dir, config.params)
        return _run_solver_experiment(config)
    except FracstickError as exc:
        print(f"config error: {exc}")
        return 3


def _run_dichotomy(config: ExperimentConfig) -> int:
    dc = config.dichotomy_cfg
    result = wedge_integral_partial(
        beta=float(dc.get("beta", "1.5")),
        s=config.params.s,
        mu=float(dc.get("mu", "0.125")),
        c=float(dc.get("c", "0.5")),
        k_max=int(dc.get("k_max", "12")),
        params=config.params,
    )
    rows = list(
        zip(range(1, len(result.shell_terms) + 1), result.shell_terms, result.partial_sums)
    )
    csv_path = os.path.join(config.output_dir, "dichotomy_shells.csv")
    with open(csv_path, "w") as fh:
        fh.write("k,shell_term,partial_sum\n")
        for k, t, p in rows:
            fh.write(f"{k},{_fmt(t)},{_fmt(p)}\n")
    report = {
        "experiment": "dichotomy",
        "params": {"n": config.params.n, "s": config.params.s},
        "per_resolution": [],
        "metrics": {
            "fitted_ratio": _metric(result.fitted_ratio, "analysis", 0.0),
            "beta": _metric(result.beta, "analysis", 0.0),
        },
        "verdict": result.verdict,
    }
    _write_json(os.path.join(config.output_dir, "report.json"), report)
    _write_summary(
        config,
        [f"dichotomy beta={result.beta} s={result.s}: verdict {result.verdict}, "
         f"fitted shell ratio {result.fitted_ratio:.6f}"],
    )
    return 0


def _barrier_spec_from_config(config: ExperimentConfig, disk, grid):
    bc = config.barrier_cfg
    alpha = float(bc.get("alpha", "0.9"))
    gamma = float(bc.get("gamma_fraction", "0.5")) * config.params.s / alpha
    rho = float(bc.get("rho", repr(0.5 * disk.radius)))
    p0 = tuple(float(x) for x in bc.get("p0", "0.0 -2.2").split())
    eps = float(bc.get("epsilon", "0.01"))
    return barriers.BarrierSpec(
        disk=disk, alpha=alpha, rho=rho, epsilon=eps, gamma=gamma, p0=p0, grid=grid
    )


def _run_barrier_certify(config: ExperimentConfig) -> int:
    from .geometry import TangentDisk

    bc = config.barrier_cfg
    disk_radius = float(bc.get("disk_radius", "0.7"))
    disk = TangentDisk((0.0, disk_radius), disk_radius)
    cells = int(bc.get("cells", "96"))
    grid = UniformGrid([-1.0, -1.0], [1.0, 1.0], 2.0 / cells)
    spec = _barrier_spec_from_config(config, disk, grid)
    _, info = barriers.build_w(spec)
    spec = dataclasses.replace(spec, holder_norm=info["holder_norm"])
    eps_list = [float(x) for x in bc.get("eps_ladder", "1e-1 1e-2 1e-3 1e-4").split()]
    bound_rows = []
    for eps in eps_list:
        rep = barriers.curvature_bound_w(dataclasses.replace(spec, epsilon=eps), config.params)
        bound_rows.append((eps, rep.bound, rep.max_certified, rep.max_value, rep.all_below_bound))
    eps_star, ladder = barriers.certify_negative(spec, config.params, k_max=24)
    _, control = barriers.build_v(
        dataclasses.replace(spec, epsilon=eps_star if eps_star else spec.epsilon, bump_sign=-1.0),
        config.params,
    )
    csv_path = os.path.join(config.output_dir, "bound_ladder.csv")
    with open(csv_path, "w") as fh:
        fh.write("epsilon,bound,max_certified,max_value,below_bound\n")
        for row in bound_rows:
            fh.write(",".join(_fmt(x) if not isinstance(x, bool) else str(int(x)) for x in row) + "\n")
    le = np.log([r[0] for r in bound_rows])
    slope_bound = float(np.polyfit(le, np.log([r[1] for r in bound_rows]), 1)[0])
    slope_cert = float(np.polyfit(le, np.log([r[2] for r in bound_rows]), 1)[0])
    certified = eps_star is not None
    report = {
        "experiment": "barrier-certify",
        "params": {"n": config.params.n, "s": config.params.s, "alpha": spec.alpha,
                   "gamma": spec.gamma},
        "per_resolution": [],
        "metrics": {
            "holder_norm": _metric(info["holder_norm"], "barriers", 0.0),
            "grad_at_origin": _metric(info["grad_at_origin"], "barriers", grid.h),
            "slope_bound": _metric(slope_bound, "barriers", 0.0),
            "slope_certified": _metric(slope_cert, "barriers", 0.0),
            "eps_star": _metric(eps_star if eps_star else math.nan, "barriers", 0.0),
            "negative_control_max_curvature": _metric(
                control.max_curvature, "barriers", 0.0
            ),
        },
        "verdict": "certified" if certified and not control.certified else "not-certified",
    }
    _write_json(os.path.join(config.output_dir, "report.json"), report)
    _write_summary(
        config,
        [
            f"barrier bound slope {slope_bound:.4f}, certified-sample slope {slope_cert:.4f} "
            f"(target {config.params.s/spec.alpha:.4f})",
            f"negativity certified at eps* = {eps_star}",
            f"negative control certified: {control.certified} (expected False)",
        ],
    )
    return 0 if report["verdict"] == "certified" else 2


def _run_solver_experiment(config: ExperimentConfig) -> int:
    params = config.params
    domain = config.domain()
    datum = config.datum()
    radii = [float(r) for r in config.analysis_cfg.get("radii", "0.2 0.1 0.05").split()]
    grid_box = config.grid_box
    if grid_box is None:
        grid_box = (domain.box_lo, domain.box_hi)

    barrier_block = None
    if config.kind == "reentrant-stickiness":
        barrier_block = _certify_stickiness_barrier(config, domain)

    per_res = []
    summary_lines = []
    prev = None
    converged_all = True
    for cells in config.resolutions:
        grid = UniformGrid(grid_box[0], grid_box[1], _box_width(grid_box) / cells)
        init = _prolong(prev, grid) if prev is not None else None
        u, rep = solve_minimal_graph(domain, datum, params, grid, config.solver, initial_values=init)
        converged_all &= rep.converged
        _write_solution_csv(
            os.path.join(config.output_dir, f"solution_res{cells}.csv"), u
        )
        metrics = {}
        if config.kind == "convex-corner":
            sticky = continuity_modulus(u, np.zeros(grid.ndim), radii)
            for r, sup, inf in zip(sticky.radii, sticky.sup_values, sticky.inf_values):
                bandw = max(abs(sup), abs(inf))
                metrics[f"sup_abs_u_r{r:g}"] = _metric(bandw, "analysis", config.solver.tolerance)
        else:
            disk = domain.tangent_disk
            sticky = measure_jump(u, disk, radii)
            for r, inf in zip(sticky.radii, sticky.inf_values):
                metrics[f"inf_u_over_S_r{r:g}"] = _metric(inf, "analysis", config.solver.tolerance)
            if barrier_block is not None:
                v_graph = GraphFunction.from_callable(
                    grid,
                    lambda q: barrier_block["spec"].v_values(q),
                    datum=barrier_block["v_datum"],
                )
                sub = subsolution_check(u, v_graph, slack=10.0 * config.solver.tolerance)
                metrics["barrier_violations"] = _metric(
                    sub["violations"], "solver", config.solver.tolerance
                )
                metrics["barrier_max_depth"] = _metric(
                    sub["max_depth"], "solver", config.solver.tolerance
                )
        per_res.append(
            {
                "h": grid.h,
                "cells": cells,
                "residual": rep.final_residual_max,
                "residual_l2": rep.final_residual_l2,
                "iterations": rep.iterations,
                "converged": rep.converged,
                "metrics": metrics,
                "errors": {
                    "truncation": config.solver.tolerance,
                    "singular_cell": grid.h ** (1.0 - params.s),
                },
            }
        )
        summary_lines.append(
            f"res {cells}: h={grid.h:.5g} residual={rep.final_residual_max:.3e} "
            f"iters={rep.iterations} converged={rep.converged}"
        )
        for name, m in metrics.items():
            summary_lines.append(f"    {name} = {m['value']:.6g}")
        prev = u

    verdict = _experiment_verdict(config, per_res)
    report = {
        "experiment": config.kind,
        "params": {"n": params.n, "s": params.s},
        "per_resolution": per_res,
        "verdict": verdict,
    }
    if barrier_block is not None:
        report["barrier"] = {
            "eps": barrier_block["spec"].epsilon,
            "eps_star": barrier_block["eps_star"],
            "certified": barrier_block["certified"],
        }
    _write_json(os.path.join(config.output_dir, "report.json"), report)
    _write_summary(config, summary_lines + [f"verdict: {verdict}"])
    return 0 if converged_all else 2


def _certify_stickiness_barrier(config: ExperimentConfig, domain: PlanarDomain):
    """Certify a barrier compatible with the configured exterior bump datum."""
    disk = domain.tangent_disk
    if disk is None:
        raise DomainError("stickiness experiments need a domain with an inward tangent disk")
    bc = dict(config.barrier_cfg)
    bc.setdefault("p0", config.datum_cfg.get("center", "1.6 -1.6"))
    cells = int(bc.get("cells", "96"))
    pad = 1.2 * disk.radius
    grid = UniformGrid([-pad, -pad], [pad, pad], 2.0 * pad / cells)
    cfg2 = dataclasses.replace(config)
    cfg2.barrier_cfg = bc
    spec = _barrier_spec_from_config(cfg2, disk, grid)
    _, info = barriers.build_w(spec)
    spec = dataclasses.replace(spec, holder_norm=info["holder_norm"])
    height = float(config.datum_cfg.get("height", "0.1"))
    # datum must dominate the barrier bump: eps^gamma <= height
    k_min = max(1, int(math.ceil(-math.log2(height ** (1.0 / spec.gamma)))))
    eps_star, _ = barriers.certify_negative(spec, config.params, k_min=k_min, k_max=26)
    if eps_star is None:
        return {"spec": spec, "eps_star": None, "certified": False, "v_datum": None}
    spec = dataclasses.replace(spec, epsilon=eps_star)
    v_bound = eps_star**spec.gamma + eps_star * 1.0
    v_datum = ExteriorDatum(
        fn=lambda q: spec.v_values(q),
        bound=v_bound,
        support_radius=float(np.linalg.norm(spec.p0)) + 1.0,
        description={"kind": "barrier-v"},
    )
    return {"spec": spec, "eps_star": eps_star, "certified": True, "v_datum": v_datum}


def _experiment_verdict(config, per_res) -> str:
    if config.kind == "convex-corner":
        ok = True
        for block in per_res:
            vals = [m["value"] for name, m in sorted(block["metrics"].items(),
                                                     key=lambda kv: -_radius_of(kv[0]))]
            ok &= all(b < a for a, b in zip(vals, vals[1:]))
        return "continuity-consistent" if ok else "continuity-violated"
    if config.kind == "reentrant-stickiness":
        ok = True
        for block in per_res:
            infs = [m["value"] for name, m in block["metrics"].items() if name.startswith("inf_u")]
            ok &= all(v > 0 for v in infs)
        return "sticky" if ok else "not-sticky"
    return "n/a"


def _radius_of(name: str) -> float:
    return float(name.rsplit("_r", 1)[-1])


def _box_width(box) -> float:
    lo, hi = box
    return float(max(b - a for a, b in zip(lo, hi)))


def _write_summary(config: ExperimentConfig, lines):
    path = os.path.join(config.output_dir, "summary.txt")
    with open(path, "w") as fh:
        fh.write(f"experiment: {config.kind}\n")
        fh.write(f"n = {config.params.n}, s = {config.params.s}\n")
        for line in lines:
            fh.write(line + "\n")


def crossval(seed: int, output_dir: str, params: FractionalParams = None) -> int:
    """Cross-validate the graph curvature path against the PV oracle.

    Draws smooth random 1-D graphs (3 low-frequency modes, windowed to
    compact support), evaluates both routes at the center node for
    s in {0.3, 0.5, 0.7}, and writes one CSV row per case.
    """
    os.makedirs(output_dir, exist_ok=True)
    rows = []
    worst = 0.0
    for s in (0.3, 0.5, 0.7):
        p = FractionalParams(1, s)
        fn = _random_smooth_graph(seed)
        grid = UniformGrid([-1.0], [1.0], 2.0 / 64)
        datum = ExteriorDatum(fn=fn, bound=1.0, support_radius=2.6)
        u = GraphFunction.from_callable(grid, fn, datum=datum)
        ev = CurvatureEvaluator(u, p, R=4.0)
        g = ev.sample_at(grid.origin_index())
        x0 = grid.coords_of(grid.origin_index())
        P = np.array([x0[0], fn(x0[None, :])[0]])
        E = implicit_set(subgraph_fn(fn), h=grid.h / 4096, align_point=P)
        pv = set_curvature_pv(
            E, P, p, r_in=grid.h / 8, R=16.0, n_dirs=2048, far="subgraph", far_level=0.0
        )
        rel = abs(g.value - pv.value) / max(abs(pv.value), 1e-12)
        worst = max(worst, rel)
        rows.append((s, g.value, pv.value, rel))
    path = os.path.join(output_dir, f"crossval_seed{seed}.csv")
    with open(path, "w") as fh:
        fh.write("s,graph_value,pv_value,rel_diff\n")
        for s, gv, pvv, rel in rows:
            fh.write(f"{_fmt(s)},{_fmt(gv)},{_fmt(pvv)},{_fmt(rel)}\n")
    print(f"crossval seed {seed}: worst relative difference {worst:.4%}")
    return 0


def _random_smooth_graph(seed: int):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-0.12, 0.12, 3)
    b = rng.uniform(-0.12, 0.12, 3)
    ph = rng.uniform(0, 2 * np.pi, 3)

    def fn(q):
        x = q[:, 0]
        val = sum(
            a[k] * np.sin((k + 1) * np.pi * x / 1.6 + ph[k])
            + b[k] * np.cos((k + 1) * np.pi * x / 1.4)
            for k in range(3)
        )
        return val * (1.0 - smoothstep((np.abs(x) - 1.8) / 0.8))

    return fn
