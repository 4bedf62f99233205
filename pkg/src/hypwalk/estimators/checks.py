"""Inequality checks around the dimension bound and the mu_k construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientResolution
from ..measures import MuKFamily, entropy, mu_k_entropy_bound
from ..walker import WalkConfig, sample_boundary_arrays
from .empirical import BoundarySet, EmpiricalBoundaryMeasure, as_measure
from .entropy import entropy_upper_bound
from .escape import escape_rate_mc
from .stats import EstimateCI, ProportionCI, clopper_pearson, slope_trend_p


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one inequality check; ``margin < 0`` exactly when it fails."""

    name: str
    passed: bool
    inequality: str
    value: float
    bound: float
    margin: float
    details: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "inequality": self.inequality,
            "value": self.value,
            "bound": self.bound,
            "margin": self.margin,
            **self.details,
        }


def _ratio_sigma(h: EstimateCI, l: EstimateCI, ratio: float) -> float:
    rel = 0.0
    if h.value:
        rel += (h.std_error / h.value) ** 2
    rel += (l.std_error / l.value) ** 2
    return abs(ratio) * math.sqrt(rel)


def dim_bound_check(h_est: EstimateCI, l_est: EstimateCI, dim_est: EstimateCI, a: float) -> CheckResult:
    """``dim <= h / (l log a)`` up to three combined standard errors."""
    if not l_est.value > 0:
        raise ValueError("rate of escape must be positive for the dimension bound")
    bound = h_est.value / (l_est.value * math.log(a))
    sigma = math.hypot(dim_est.std_error, _ratio_sigma(h_est, l_est, bound))
    margin = bound + 3 * sigma - dim_est.value
    rel_gap = abs(dim_est.value - bound) / bound if bound else math.inf
    return CheckResult(
        "dimension-bound", margin >= 0, "dim <= h/(l log a) + 3 sigma", dim_est.value, bound, margin,
        {"sigma": sigma, "relative_gap": rel_gap},
    )


def entropy_growth_check(h_est: EstimateCI, l_est: EstimateCI, growth: float) -> CheckResult:
    """``h <= l v`` with ``v`` the exponential growth rate, up to three standard errors."""
    bound = l_est.value * growth
    sigma = math.hypot(h_est.std_error, l_est.std_error * growth)
    margin = bound + 3 * sigma - h_est.value
    return CheckResult(
        "entropy-growth", margin >= 0, "h <= l v + 3 sigma", h_est.value, bound, margin,
        {"sigma": sigma, "relative_gap": abs(h_est.value - bound) / bound if bound else math.inf},
    )


def convexity_values(fam: MuKFamily, nu, k: int) -> tuple[np.ndarray, int]:
    """``beta_xi(o, g^k o) + beta_xi(o, g^-k o)`` over resolvable samples."""
    nu = as_measure(nu, fam.model.visual_base)
    b1, u1 = nu.busemann_from_origin(fam.gamma(k))
    b2, u2 = nu.busemann_from_origin(fam.gamma(-k))
    bad = u1 | u2
    return (b1 + b2)[~bad], int(bad.sum())


def convexity_check(fam: MuKFamily, nu, k: int, floor: float = 0.0) -> CheckResult:
    """Minimum of the Busemann bracket over samples; must stay above ``-floor``."""
    vals, unresolved = convexity_values(fam, nu, k)
    if len(vals) == 0:
        raise InsufficientResolution("no sample resolves the Busemann bracket")
    lo = float(vals.min())
    return CheckResult(
        "convexity", lo >= -floor, "min beta(o,g^k) + beta(o,g^-k) >= -C", lo, -floor, lo + floor,
        {"k": k, "mean": float(vals.mean()), "samples": len(vals), "unresolved": unresolved},
    )


def _check_neighbourhood(fam: MuKFamily, U: BoundarySet):
    for name, pt in (("attracting", fam.gamma_plus), ("repelling", fam.gamma_minus)):
        if not U.contains(pt):
            raise ValueError(f"the region must contain the {name} fixed point {pt}")


def gromov_product_outside(fam: MuKFamily, U: BoundarySet, xi, k: int) -> float:
    """``(xi | g^k o)_o`` for one point ``xi`` outside ``U``."""
    _check_neighbourhood(fam, U)
    if U.contains(xi):
        raise ValueError(f"{xi} lies in the excluded region")
    return float(fam.model.gromov_product(xi, fam.model.act(fam.gamma(k), fam.model.basepoint)))


def gromov_bound_check(fam: MuKFamily, U: BoundarySet, k_grid, nu, alpha: float = 0.05) -> CheckResult:
    """Max of ``(xi | g^{+-k} o)`` over samples outside ``U``, per k, with a trend test.

    ``U`` is a neighbourhood of both fixed points; ``nu`` is one empirical
    measure or a mapping from k to one. Passes when there is no significant
    upward trend in k.
    """
    _check_neighbourhood(fam, U)
    maxes, unresolved = [], 0
    for k in k_grid:
        meas = as_measure(nu[k] if isinstance(nu, dict) else nu, fam.model.visual_base)
        inside, und = meas.membership(U)
        keep = ~inside & ~und
        unresolved += int(und.sum())
        best = -math.inf
        for sgn in (1, -1):
            gp, bad = meas.gromov_with(fam.gamma(sgn * k))
            ok = keep & ~bad
            unresolved += int((keep & bad).sum())
            if ok.any():
                best = max(best, float(gp[ok].max()))
        maxes.append(best)
    slope, p = slope_trend_p(list(k_grid), maxes)
    passed = bool(p > alpha or slope <= 0)
    top = max(maxes)
    return CheckResult(
        "gromov-bound", passed, "no upward trend in max (xi|g^k o) over k", top, top, (p - alpha) if slope > 0 else 1.0,
        {"k_grid": list(map(int, k_grid)), "max_by_k": maxes, "slope": slope, "p_value": p, "unresolved": unresolved},
    )


def open_set_mass(nu, U: BoundarySet, level: float = 0.99) -> ProportionCI:
    """Empirical ``nu(U)`` with a Clopper-Pearson interval; undecidable samples count as outside."""
    nu = as_measure(nu)
    inside, und = nu.membership(U)
    return clopper_pearson(int(inside.sum()), len(nu), level, int(und.sum()))


@dataclass(frozen=True)
class RatioRow:
    k: int
    entropy_mu_k: float
    h_bound: float
    l_hat: float
    l_se: float
    busemann_lower: float
    ratio: float


@dataclass(frozen=True)
class RatioTable:
    rows: list
    entropy_cap: float
    checks: list

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def ratio_experiment(fam: MuKFamily, k_grid, cfg: WalkConfig, nus: dict | None = None,
                     boundary_cfg: WalkConfig | None = None, n_conv: int = 8, target: float = 0.15,
                     monotone_from: int = 2, burn_in: int = 0) -> RatioTable:
    """Entropy bound, escape rate and their ratio along ``mu_k``.

    ``busemann_lower`` is a quarter of the mean Busemann bracket under the
    empirical harmonic measure of ``mu_k``, a lower bound for the escape rate.
    """
    k_grid = [int(k) for k in k_grid]
    if k_grid != sorted(k_grid):
        raise ValueError("k grid must be ascending")
    cap = mu_k_entropy_bound(fam.base)
    rows = []
    for k in k_grid:
        mk = fam.measure(k)
        hb = entropy_upper_bound(mk, n_max=n_conv)
        l = escape_rate_mc(mk, fam.model, cfg, burn_in=burn_in)
        if nus is not None and k in nus:
            nu = nus[k]
        else:
            nu = EmpiricalBoundaryMeasure(sample_boundary_arrays(mk, fam.model, boundary_cfg or cfg),
                                          fam.model.visual_base)
        vals, _ = convexity_values(fam, nu, k) if k > 0 else (np.zeros(1), 0)
        rows.append(RatioRow(k, entropy(mk), hb, l.value, l.std_error, 0.25 * float(vals.mean()), hb / l.value))
    ratios = np.array([r.ratio for r in rows])
    tail = ratios[[i for i, k in enumerate(k_grid) if k >= monotone_from]]
    mono = bool(np.all(np.diff(tail) < 0))
    checks = [
        CheckResult("ratio-monotone", mono, f"ratio strictly decreasing for k >= {monotone_from}",
                    float(np.max(np.diff(tail))) if len(tail) > 1 else 0.0, 0.0,
                    -float(np.max(np.diff(tail))) if len(tail) > 1 else 0.0),
        CheckResult("ratio-target", bool(ratios[-1] < target), f"ratio at k={k_grid[-1]} < {target}",
                    float(ratios[-1]), target, target - float(ratios[-1])),
        CheckResult("entropy-bounded", all(r.entropy_mu_k <= cap + 1e-12 for r in rows),
                    "H(mu_k) <= 3/2 log 2 + H(mu)/2 for every k",
                    max(r.entropy_mu_k for r in rows), cap, cap - max(r.entropy_mu_k for r in rows)),
    ]
    return RatioTable(rows, cap, checks)
