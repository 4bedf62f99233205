"""The bundled experiments E1-E5 and the machinery that runs one config."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import __version__
from .boundary_lab import atom_concentration, empirical_cylinder_masses
from .config import ExperimentConfig, build_family, build_measure, build_model, k_grid, load_config
from .errors import EstimatorFailure, HypwalkError
from .estimators import (
    BoundarySet,
    CheckResult,
    EmpiricalBoundaryMeasure,
    EstimateCI,
    convexity_check,
    correlation_dimension,
    dim_bound_check,
    entropy_growth_check,
    entropy_rate_exact_tree,
    entropy_upper_bound,
    escape_rate_busemann,
    escape_rate_exact_tree,
    escape_rate_mc,
    gromov_bound_check,
    open_set_mass,
    pointwise_dimension,
    ratio_experiment,
)
from .estimators.entropy import radial_parameters
from .estimators.stats import linear_fit, mann_kendall
from .spaces import FreeGroupTree
from .walker import sample_boundary_arrays, walk_distances

log = logging.getLogger(__name__)

POINTWISE_MIN_SAMPLES = 10_000


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    estimates: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    plotdata: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=dict)  # resolution accounting per sampled measure

    @property
    def passed(self) -> bool:
        return not self.errors and all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        codes = [e["exit_code"] for e in self.errors]
        if 3 in codes:
            return 3
        return 0 if self.passed else 1


class Run:
    """Collects estimates and checks; a failing step is recorded, not fatal."""

    def __init__(self, cfg: ExperimentConfig, threads: int | None = None):
        self.cfg = cfg
        self.threads = threads
        self.result = ExperimentResult(cfg)
        self.model = build_model(cfg)
        self.measure = build_measure(cfg, self.model)

    def param(self, key, default):
        return self.cfg.get("estimators", key, default)

    def threshold(self, key, default):
        return self.cfg.get("thresholds", key, default)

    def walk(self, **overrides):
        return self.cfg.walk_config(self.threads, **overrides)

    def boundary(self, m, tag: str = "harmonic", **overrides):
        n = overrides.pop("trajectories", None) or self.cfg.get("walk", "boundary_trajectories", 20_000)
        cfg = self.walk(trajectories=n, **overrides)
        nu = EmpiricalBoundaryMeasure(sample_boundary_arrays(m, self.model, cfg), self.model.visual_base)
        self.result.boundary[tag] = {"samples": len(nu), "walk_steps": nu.data.n_max, **nu.resolution_summary()}
        return nu

    def step(self, name: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EstimatorFailure as exc:
            self.result.errors.append({"step": name, "type": type(exc).__name__, "message": str(exc),
                                       "details": exc.details, "exit_code": 1})
        except HypwalkError as exc:
            self.result.errors.append({"step": name, "type": type(exc).__name__, "message": str(exc),
                                       "details": {}, "exit_code": exc.exit_code})
        log.warning("step %s failed: %s", name, self.result.errors[-1]["message"])
        return None

    def estimate(self, name: str, est: EstimateCI | None):
        if est is not None:
            self.result.estimates[name] = est
        return est

    def check(self, res: CheckResult | None):
        if res is not None:
            self.result.checks.append(res)
        return res

    def table(self, name, columns, rows):
        self.result.tables[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}

    def plot(self, name, rows):
        self.result.plotdata[name] = [list(r) for r in rows]


def _rel_check(name, value, target, tol, what) -> CheckResult:
    rel = abs(value - target) / abs(target)
    return CheckResult(name, rel < tol, f"|{what}| / target < {tol}", value, target, tol - rel,
                       {"relative_error": rel})


def _tree_entropy(run: Run, m, n_table: int) -> EstimateCI:
    """Certified entropy bound with a 1/n-tail error proxy when the exact route applies."""
    if isinstance(run.model, FreeGroupTree) and radial_parameters(m, run.model) is not None:
        seq = entropy_rate_exact_tree(m, run.model, n_table)
        lim = seq.limit(run.cfg.seed)
        tail = len(seq.raw) * lim.std_error
        return replace(lim, std_error=tail, details={**lim.details, "gap": lim.std_error, "tail_proxy": tail})
    n_conv = run.param("entropy_convolution_depth", 8)
    return EstimateCI(entropy_upper_bound(m, n_max=n_conv), 0.0, n_conv, "convolution-bound", run.cfg.seed)


def _pointwise(nu, centers, seed):
    if len(nu) < POINTWISE_MIN_SAMPLES:
        raise EstimatorFailure(f"pointwise dimension needs {POINTWISE_MIN_SAMPLES} boundary samples, got {len(nu)}",
                               {"samples": len(nu)})
    return pointwise_dimension(nu, centers=centers, seed=seed, min_samples=POINTWISE_MIN_SAMPLES)


def _dims(run: Run, nu, tag: str):
    pw = run.step(f"pointwise-dimension-{tag}", _pointwise, nu, run.param("dimension_centers", 1000), run.cfg.seed)
    cd = run.step(f"correlation-dimension-{tag}", correlation_dimension, nu, seed=run.cfg.seed)
    if pw is not None:
        run.estimate(f"pointwise_dimension_{tag}", pw.estimate)
    run.estimate(f"correlation_dimension_{tag}", cd)
    return pw, cd


def _ball_curve(nu, scales) -> list:
    from .estimators.dimension import ball_counts  # local: only plotting needs the raw curve
    idx = np.arange(min(len(nu), 20_000))
    c = ball_counts(nu, scales, idx)
    corr = ((c - 1) / (len(nu) - 1)).mean(axis=0)
    return [[int(j), "log_correlation_sum", float(np.log(v)) if v > 0 else None, None, None]
            for j, v in zip(scales, corr)]


# E1

def run_e1(run: Run):
    m, model = run.measure, run.model
    wcfg = run.walk()
    l_mc = run.estimate("escape_rate_mc", run.step("escape-mc", escape_rate_mc, m, model, wcfg))
    exact = None
    if radial_parameters(m, model) is not None:
        exact = run.step("escape-exact", escape_rate_exact_tree, m, model, wcfg.steps)
    if l_mc is not None and exact is not None:
        target = float(exact.values[-1])
        run.check(CheckResult("escape-mc-vs-exact", abs(l_mc.value - target) <= 3 * l_mc.std_error + 1e-12,
                              "|l_mc - L(mu^n)/n| <= 3 se", l_mc.value, target,
                              3 * l_mc.std_error - abs(l_mc.value - target)))
    n_table = run.param("entropy_n_table", 60)
    h = run.estimate("entropy_rate", run.step("entropy-exact", _tree_entropy, run, m, n_table))
    nu = run.step("boundary-samples", run.boundary, m)
    if nu is None:
        return
    run.estimate("escape_rate_busemann", run.step("escape-busemann", escape_rate_busemann, m, model, nu,
                                                   seed=run.cfg.seed))
    pw, cd = _dims(run, nu, "harmonic")
    tol = run.threshold("dimension_relative_tolerance", 0.10)
    if h is not None and l_mc is not None:
        ratio = h.value / (l_mc.value * math.log(model.visual_base))
        if pw is not None:
            run.check(dim_bound_check(h, l_mc, pw.estimate, model.visual_base))
            run.check(_rel_check("dimension-equals-entropy-over-drift", pw.median, ratio, tol, "dim - h/l"))
        if cd is not None:
            run.check(_rel_check("correlation-equals-entropy-over-drift", cd.value, ratio, tol, "dim_c - h/l"))
        run.check(entropy_growth_check(h, l_mc, model.growth))
        run.check(_rel_check("entropy-growth-equality", h.value, l_mc.value * model.growth,
                             run.threshold("growth_equality_tolerance", 0.05), "h - l v"))
    if pw is not None and cd is not None and len(nu) >= 100_000:
        run.check(_rel_check("pointwise-vs-correlation", pw.median, cd.value,
                             run.threshold("estimator_agreement", 0.15), "dim_p - dim_c"))
    run.table("cylinder_masses_depth2", ["depth", "cylinder", "mass"],
              [[2, c, mass] for c, mass in empirical_cylinder_masses(nu, 2)])
    seq = run.step("entropy-sequence", entropy_rate_exact_tree, m, model, n_table)
    if seq is not None:
        run.plot("entropy_sequence", [[n + 1, q, float(v), None, None]
                                      for n in range(len(seq.values))
                                      for q, v in (("H_n_over_n", seq.values[n]), ("increment", seq.increments[n]))])
    run.plot("correlation_curve", _ball_curve(nu, np.arange(1, 13)))


# E2

def run_e2(run: Run):
    m, model = run.measure, run.model
    h = run.estimate("entropy_bound", run.step("entropy-bound", _tree_entropy, run, m,
                                               run.param("entropy_n_table", 60)))
    if h is not None:
        # the bound must not carry a statistical error: it is certified
        h = run.estimate("entropy_bound", replace(h, std_error=0.0))
    l_mc = run.estimate("escape_rate_mc", run.step("escape-mc", escape_rate_mc, m, model, run.walk(),
                                                    burn_in=run.param("burn_in", 0)))
    nu = run.step("boundary-samples", run.boundary, m)
    if nu is None:
        return
    pw, cd = _dims(run, nu, "harmonic")
    if h is not None and l_mc is not None and pw is not None:
        res = run.check(dim_bound_check(h, l_mc, pw.estimate, model.visual_base))
        run.plot("dimension_vs_bound", [[0, "pointwise_dimension", pw.median,
                                         pw.median - pw.estimate.std_error, pw.median + pw.estimate.std_error],
                                        [0, "bound", res.bound, None, None]])
    if h is not None and l_mc is not None and cd is not None:
        run.check(replace(dim_bound_check(h, l_mc, cd, model.visual_base), name="dimension-bound-correlation"))


# E3

def run_e3(run: Run):
    model = run.model
    fam = build_family(run.cfg, model, run.measure)
    grid = k_grid(run.cfg)
    wcfg = run.walk()
    nus = {}
    for k in grid:
        nus[k] = run.step(f"boundary-samples-k{k}", run.boundary, fam.measure(k), f"k{k}")
    if any(v is None for v in nus.values()):
        return
    tab = run.step("ratio-experiment", ratio_experiment, fam, grid, wcfg, nus=nus,
                   n_conv=run.param("entropy_convolution_depth", 8),
                   target=run.threshold("ratio_target", 0.15),
                   monotone_from=run.threshold("monotone_from_k", 2),
                   burn_in=run.param("burn_in", 0))
    if tab is None:
        return
    for c in tab.checks:
        run.check(c)
    l_hat = tab.column("l_hat")
    slope, icpt, r2 = linear_fit(grid, l_hat)
    strictly = bool(np.all(np.diff(l_hat) > 0))
    r2_min = run.threshold("affine_r2", 0.99)
    run.check(CheckResult("escape-affine-in-k", strictly and r2 > r2_min,
                          f"l_hat strictly increasing and affine R^2 > {r2_min}", r2, r2_min, r2 - r2_min,
                          {"slope": slope, "intercept": icpt, "strictly_increasing": strictly}))
    floor = run.threshold("convexity_floor", 0.0)
    for k in grid:
        if k > 0:
            res = run.step(f"convexity-k{k}", convexity_check, fam, nus[k], k, floor=floor)
            run.check(None if res is None else replace(res, name=f"convexity-k{k}"))
    masses = []
    if isinstance(model, FreeGroupTree):
        U_open = BoundarySet.cylinder(run.cfg.get("estimators", "open_set", "b"), rank=model.rank)
        for k in grid:
            ci = open_set_mass(nus[k], U_open, level=run.threshold("open_set_level", 0.99))
            masses.append([k, ci.value, ci.lo, ci.hi])
        lo = min(r[2] for r in masses)
        run.check(CheckResult("open-set-mass-positive", lo > 0, "min_k lower CI of nu_k(U) > 0", lo, 0.0, lo))
        heads = {fam.gamma_plus.head(1), fam.gamma_minus.head(1)}
        U_fix = BoundarySet(cylinders=tuple(sorted(heads)))
        run.check(run.step("gromov-bound", gromov_bound_check, fam, U_fix, grid, nus))
    run.table("ratio", ["k", "entropy_mu_k", "h_bound", "l_hat", "l_se", "busemann_lower", "ratio"],
              [[r.k, r.entropy_mu_k, r.h_bound, r.l_hat, r.l_se, r.busemann_lower, r.ratio] for r in tab.rows])
    if masses:
        run.table("open_set_mass", ["k", "mass", "lo", "hi"], masses)
    rows = []
    for r in tab.rows:
        rows += [[r.k, "h_bound", r.h_bound, None, None],
                 [r.k, "l_hat", r.l_hat, r.l_hat - 2 * r.l_se, r.l_hat + 2 * r.l_se],
                 [r.k, "busemann_lower", r.busemann_lower, None, None],
                 [r.k, "ratio", r.ratio, None, None]]
    run.plot("ratio_sweep", rows)


# E4

def run_e4(run: Run):
    m, model = run.measure, run.model
    l_mc = run.estimate("escape_rate_mc", run.step("escape-mc", escape_rate_mc, m, model, run.walk(),
                                                    burn_in=run.param("burn_in", 0)))
    nu = run.step("boundary-samples", run.boundary, m)
    if nu is None:
        return
    l_b = run.estimate("escape_rate_busemann", run.step("escape-busemann", escape_rate_busemann, m, model, nu,
                                                         seed=run.cfg.seed))
    if l_mc is None or l_b is None:
        return
    joint = math.hypot(l_mc.std_error, l_b.std_error)
    z = run.threshold("joint_se", 2.0)
    diff = abs(l_mc.value - l_b.value)
    run.check(CheckResult("busemann-formula", diff <= z * joint, f"|l_busemann - l_mc| <= {z} joint se",
                          diff, z * joint, z * joint - diff, {"joint_se": joint}))
    run.plot("escape_routes", [[0, "monte_carlo", l_mc.value, l_mc.value - 2 * l_mc.std_error,
                                l_mc.value + 2 * l_mc.std_error],
                               [1, "busemann", l_b.value, l_b.value - 2 * l_b.std_error,
                                l_b.value + 2 * l_b.std_error]])


# E5

def run_e5(run: Run):
    model = run.model
    fam = build_family(run.cfg, model, run.measure)
    grid = k_grid(run.cfg)
    k_top = grid[-1]
    a = model.visual_base
    radius_exps = run.cfg.get("estimators", "atom_radius_exponents", [5, 3, 8])
    depth_atoms = max(16, max(radius_exps) + 1)
    tables = {e: [] for e in radius_exps}
    dims = {}
    for k in grid:
        deep = k in (0, k_top)
        depth = run.param("dimension_depth", 256) if deep else depth_atoms
        nu = run.step(f"boundary-samples-k{k}", run.boundary, fam.measure(k), f"k{k}", boundary_depth=depth)
        if nu is None:
            return
        for e in radius_exps:
            tables[e].append(atom_concentration(fam, [k], a ** (-e), {k: nu}).rows[0])
        if deep:
            dims[k] = _dims(run, nu, f"k{k}")
    for i, e in enumerate(radius_exps):
        tau, p = mann_kendall([r.mass for r in tables[e]])
        name = "atom-mass-trend" if i == 0 else f"atom-mass-trend-r{e}"
        res = CheckResult(name, p < 0.05, "Mann-Kendall upward trend p < 0.05", p, 0.05, 0.05 - p,
                          {"tau": tau, "radius": a ** (-e)})
        if i == 0:
            run.check(res)
        else:
            run.result.tables.setdefault("atom_trend_alternatives", {"columns": ["radius", "tau", "p"], "rows": []})
            run.result.tables["atom_trend_alternatives"]["rows"].append([a ** (-e), tau, p])
    run.table("atom_mass", ["k", "atom_mass", "radius", "lo", "hi"],
              [[r.k, r.mass, r.radius, r.lo, r.hi] for e in radius_exps for r in tables[e]])
    run.plot("atom_mass", [[r.k, f"radius a^-{e}", r.mass, r.lo, r.hi] for e in radius_exps for r in tables[e]])
    pw, cd = dims.get(k_top, (None, None))
    target = run.threshold("dimension_target", 0.3)
    boundary_dim = model.growth / math.log(a) if isinstance(model, FreeGroupTree) else 1.0 / math.log(a)
    factor = run.threshold("collapse_factor", 3.0)
    if pw is not None:
        run.check(CheckResult("dimension-collapse", pw.median < target, f"dim(nu_k) at k={k_top} < {target}",
                              pw.median, target, target - pw.median))
        run.check(CheckResult("dimension-below-boundary", factor * pw.median <= boundary_dim,
                              f"{factor} * dim(nu_k) <= boundary dimension", factor * pw.median, boundary_dim,
                              boundary_dim - factor * pw.median))
    if cd is not None:
        coarse = cd.details["full_range_slope"]
        run.check(CheckResult("dimension-collapse-coarse", coarse < target,
                              f"full-range correlation slope at k={k_top} < {target}", coarse, target, target - coarse,
                              {"full_range_residual": cd.details["full_range_residual"]}))


# the `estimate` subcommand: every estimator that applies to the configured walk

def run_estimates(run: Run):
    m, model = run.measure, run.model
    l_mc = run.estimate("escape_rate_mc", run.step("escape-mc", escape_rate_mc, m, model, run.walk(),
                                                    burn_in=run.param("burn_in", 0)))
    h = run.estimate("entropy_bound", run.step("entropy-bound", _tree_entropy, run, m,
                                               run.param("entropy_n_table", 60)))
    nu = run.step("boundary-samples", run.boundary, m)
    if nu is None:
        return
    run.estimate("escape_rate_busemann", run.step("escape-busemann", escape_rate_busemann, m, model, nu,
                                                   seed=run.cfg.seed))
    pw, _ = _dims(run, nu, "harmonic")
    if h is not None and l_mc is not None and pw is not None:
        run.check(dim_bound_check(replace(h, std_error=0.0), l_mc, pw.estimate, model.visual_base))


@dataclass(frozen=True)
class Experiment:
    id: str
    title: str
    anchor: str
    runtime: str
    configs: tuple
    runner: object

    def config_paths(self):
        root = resources.files("hypwalk") / "configs"
        return [root / name for name in self.configs]


CATALOG = {
    "E1": Experiment("E1", "Tree simple random walk: dimension, entropy and drift",
                     "tree equality dim = h/l", "~1 min", ("e1_tree_srw.toml",), run_e1),
    "E2": Experiment("E2", "Dimension bound on three walks (two trees, one Schottky group)",
                     "upper bound dim <= h/(l log a)", "~2 min",
                     ("e2_tree_srw.toml", "e2_tree_biased.toml", "e2_schottky.toml"), run_e2),
    "E3": Experiment("E3", "mu_k sweep: bounded entropy, diverging drift, vanishing ratio",
                     "h(mu_k)/l(mu_k) -> 0", "~2 min", ("e3_mu_k.toml",), run_e3),
    "E4": Experiment("E4", "Drift as a Busemann integral against the harmonic measure",
                     "l = sum_g mu(g) int beta_xi(o, g^-1 o) dnu", "~1 min",
                     ("e4_tree.toml", "e4_schottky.toml"), run_e4),
    "E5": Experiment("E5", "Dimension collapse of nu_k and atoms on the fixed-point orbit",
                     "dim nu_k < epsilon for large k", "~3 min", ("e5_collapse.toml",), run_e5),
}


def check_experiment(cfg: ExperimentConfig) -> Experiment:
    exp = CATALOG.get(cfg.experiment)
    if exp is None:
        raise cfg.error(f"unknown experiment {cfg.experiment!r}; known: {sorted(CATALOG)}", None, "experiment")
    return exp


def run_config(cfg: ExperimentConfig, threads: int | None = None, runner=None) -> ExperimentResult:
    """Run the config's experiment (or ``runner``) with every step isolated."""
    runner = runner or check_experiment(cfg).runner
    run = Run(cfg, threads)
    runner(run)
    return run.result


def bundled_configs(experiment_id: str) -> list[ExperimentConfig]:
    return [load_config(p) for p in CATALOG[experiment_id].config_paths()]


def code_version() -> str:
    return __version__
