"""Rate of escape: Monte Carlo, and the Busemann integral over the harmonic measure."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..errors import EstimatorFailure
from ..measures import FiniteMeasure
from ..spaces import SpaceModel
from ..walker import WalkConfig, walk_distances
from .empirical import as_measure
from .entropy import escape_rate_exact_tree  # noqa: F401  (re-exported route)
from .stats import EstimateCI, bootstrap_se

TAG_MC, TAG_BUSEMANN = 1, 2


def escape_rate_mc(m: FiniteMeasure, model: SpaceModel, cfg: WalkConfig, burn_in: int = 0) -> EstimateCI:
    """Mean of ``|x_n|/n`` at ``n = cfg.steps`` with a bootstrap standard error.

    With ``burn_in = b > 0`` the per-trajectory rate is
    ``(|x_n| - |x_b|) / (n - b)``, which cancels the additive constant in
    ``E|x_n| = l n + c + o(1)`` when ``n`` cannot be made large.
    """
    if not 0 <= burn_in < cfg.steps:
        raise ValueError("burn_in must lie in [0, steps)")
    if burn_in:
        cfg = replace(cfg, stride=burn_in if cfg.steps % burn_in == 0 else math.gcd(burn_in, cfg.steps))
    steps, dists, ok = walk_distances(m, model, cfg)
    bad = int((~ok).sum())
    if bad > 0.01 * len(ok):
        raise EstimatorFailure(f"{bad} of {len(ok)} trajectories hit the precision floor",
                               {"invalid": bad, "trajectories": len(ok)})
    b = int(np.flatnonzero(steps == burn_in)[0])
    rates = (dists[ok, -1] - dists[ok, b]) / (cfg.steps - burn_in)
    return EstimateCI(float(rates.mean()), bootstrap_se(rates, cfg.seed, TAG_MC), int(ok.sum()),
                      "monte-carlo", cfg.seed, {"steps": cfg.steps, "burn_in": burn_in, "invalid": bad})


def busemann_integrand(m: FiniteMeasure, model: SpaceModel, nu) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ``sum_g m(g) beta_xi(o, g^-1 o)`` and the undetermined mask."""
    nu = as_measure(nu, model.visual_base)
    total = np.zeros(len(nu))
    bad = np.zeros(len(nu), dtype=bool)
    for g, p in m:
        beta, und = nu.busemann_from_origin(model.inverse(g))
        total += p * np.where(und, 0.0, beta)
        bad |= und
    return total, bad


def escape_rate_busemann(m: FiniteMeasure, model: SpaceModel, nu, seed: int = 0) -> EstimateCI:
    """Rate of escape as the harmonic-measure average of Busemann increments.

    On trees and on the half-plane the Busemann cocycle is exact, so this
    integral equals the rate of escape itself rather than bounding it.
    """
    vals, bad = busemann_integrand(m, model, nu)
    nbad = int(bad.sum())
    if nbad > 0.01 * len(vals):
        raise EstimatorFailure(f"{nbad} of {len(vals)} boundary samples too shallow for the Busemann terms",
                               {"unresolved": nbad, "samples": len(vals)})
    vals = vals[~bad]
    return EstimateCI(float(vals.mean()), bootstrap_se(vals, seed, TAG_BUSEMANN), len(vals),
                      "busemann-integral", seed, {"unresolved": nbad})
