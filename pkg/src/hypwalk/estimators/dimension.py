"""Dimension of empirical boundary measures in the visual quasimetric.

Radii form the geometric grid ``r_j = a^-j``. On trees the closed ball of
radius ``a^-j`` around a boundary point is its depth-``j`` cylinder, so
ball counts are cylinder counts. On the half-plane the visual quasimetric
between ideal points seen from ``i`` is the half-chord on the circle after
the Cayley map, raised to the power ``log a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EstimatorFailure
from .empirical import as_measure
from .stats import EstimateCI, bootstrap_se, bootstrap_se_indexed, linear_fit, stream_rng

MIN_WINDOW = 5
MAX_RESIDUAL = 0.05
MIN_AVG_COUNT = 30
MAX_FAILED = 0.20
TAG_CENTERS, TAG_POINTWISE, TAG_CORRELATION = 11, 12, 13


def default_scales(nu) -> np.ndarray:
    if nu.kind == "tree":
        return np.arange(1, int(nu.data.depths.max()) + 1)
    return np.arange(1, 41)


def _tree_ids(nu, scales) -> list[np.ndarray]:
    """Depth-``j`` cylinder id of every sample, one array per scale.

    Samples shallower than ``j`` get a private id, so they only ever count
    themselves.
    """
    P, depth = nu.data.prefixes, nu.data.depths
    n = len(depth)
    base = 2 * nu.data.rank + 1
    ids = np.zeros(n, dtype=np.int64)
    out = {}
    for j in range(1, int(max(scales)) + 1):
        col = P[:, j - 1].astype(np.int64) if j <= P.shape[1] else np.zeros(n, dtype=np.int64)
        key = ids * base + col
        key = np.where(depth >= j, key, -1 - np.arange(n))
        _, ids = np.unique(key, return_inverse=True)
        out[j] = ids
    return [out[int(j)] if j > 0 else np.zeros(n, dtype=np.int64) for j in scales]


def ball_counts(nu, scales, centers: np.ndarray) -> np.ndarray:
    """``#{samples within a^-j of center}`` including the center, shape (centers, scales)."""
    nu = as_measure(nu)
    scales = np.asarray(scales)
    out = np.zeros((len(centers), len(scales)), dtype=np.int64)
    if nu.kind == "tree":
        for col, ids in enumerate(_tree_ids(nu, scales)):
            out[:, col] = np.bincount(ids)[ids[centers]]
        return out
    th = nu.angles()
    srt = np.sort(th)
    ext = np.concatenate([srt - 2 * np.pi, srt, srt + 2 * np.pi])
    c = th[centers]
    for col, j in enumerate(scales):
        # half-chord <= e^-j  <=>  angular gap <= 2 asin(e^-j)
        w = 2.0 * math.asin(min(1.0, math.exp(-float(j))))
        if w >= math.pi:
            out[:, col] = len(th)
            continue
        out[:, col] = np.searchsorted(ext, c + w, side="right") - np.searchsorted(ext, c - w, side="left")
    return out


@dataclass(frozen=True)
class WindowFit:
    slope: np.ndarray      # per row; nan where no window qualified
    start: np.ndarray      # first scale index of the window, -1 if none
    stop: np.ndarray       # one past the last scale index
    residual: np.ndarray   # 1 - R^2 of the chosen window


def fit_windows(x: np.ndarray, Y: np.ndarray, usable: np.ndarray, min_width: int = MIN_WINDOW,
                max_residual: float = MAX_RESIDUAL) -> WindowFit:
    """Per row, the widest contiguous window with ``1 - R^2 < max_residual``.

    Ties go to the window at smaller radii (larger scale index). A constant
    row is a perfect fit with slope 0.
    """
    R, J = Y.shape
    Yz = np.where(usable, Y, 0.0)
    zero = np.zeros((R, 1))
    cs = lambda a: np.concatenate([zero, np.cumsum(a, axis=1)], axis=1)  # noqa: E731
    X = np.broadcast_to(x, (R, J))
    Sx, Sy, Sxx, Sxy, Syy = cs(X), cs(Yz), cs(X * X), cs(X * Yz), cs(Yz * Yz)
    Sbad = cs((~usable).astype(float))
    slope = np.full(R, np.nan)
    start = np.full(R, -1)
    stop = np.full(R, -1)
    resid = np.full(R, np.nan)
    open_rows = np.ones(R, dtype=bool)
    windows = sorted(((s, e) for s in range(J) for e in range(s + min_width, J + 1)),
                     key=lambda t: (-(t[1] - t[0]), -t[0]))
    for s, e in windows:
        if not open_rows.any():
            break
        n = e - s
        sx, sy = Sx[:, e] - Sx[:, s], Sy[:, e] - Sy[:, s]
        sxx, sxy, syy = Sxx[:, e] - Sxx[:, s], Sxy[:, e] - Sxy[:, s], Syy[:, e] - Syy[:, s]
        vx = sxx - sx * sx / n
        cxy = sxy - sx * sy / n
        vy = syy - sy * sy / n
        b = cxy / vx
        ss_res = vy - b * cxy
        flat = vy <= 1e-12 * np.maximum(1.0, syy)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(flat, 0.0, ss_res / vy)
        b = np.where(flat, 0.0, b)
        ok = open_rows & (Sbad[:, e] - Sbad[:, s] == 0) & (r < max_residual)
        slope[ok], start[ok], stop[ok], resid[ok] = b[ok], s, e, r[ok]
        open_rows &= ~ok
    return WindowFit(slope, start, stop, resid)


@dataclass(frozen=True)
class PointwiseDimension:
    slopes: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    admissible: np.ndarray
    failed: int
    estimate: EstimateCI

    @property
    def median(self) -> float:
        return self.estimate.value

    @property
    def iqr(self) -> tuple[float, float]:
        s = self.slopes[np.isfinite(self.slopes)]
        return float(np.percentile(s, 25)), float(np.percentile(s, 75))


def _admissible(counts: np.ndarray) -> np.ndarray:
    return counts.mean(axis=0) >= MIN_AVG_COUNT


def pointwise_dimension(nu, scales=None, centers: int = 1000, seed: int = 0,
                        min_samples: int = 10_000) -> PointwiseDimension:
    """Distribution of local scaling slopes ``log nu(B(xi, r)) / log r``.

    Centers are a seeded subsample of the samples; each ball mass excludes
    the center itself.
    """
    nu = as_measure(nu)
    N = len(nu)
    if N < min_samples:
        raise ValueError(f"pointwise dimension needs at least {min_samples} samples, got {N}")
    scales = default_scales(nu) if scales is None else np.asarray(scales)
    rng = stream_rng(seed, TAG_CENTERS)
    idx = np.sort(rng.choice(N, size=min(centers, N), replace=False))
    counts = ball_counts(nu, scales, idx)
    adm = _admissible(counts)
    mass = (counts - 1) / (N - 1)
    with np.errstate(divide="ignore"):
        logm = np.log(mass)
    usable = (counts > 1) & adm[None, :]
    x = -scales * math.log(nu.visual_base)
    fit = fit_windows(x[adm], logm[:, adm], usable[:, adm])
    slopes = fit.slope
    failed = int(np.isnan(slopes).sum())
    if failed > MAX_FAILED * len(idx):
        raise EstimatorFailure(
            f"no valid scaling window for {failed} of {len(idx)} centers",
            {"failed": failed, "centers": len(idx), "admissible_scales": scales[adm].tolist()},
        )
    good = slopes[np.isfinite(slopes)]
    med = float(np.median(good))
    se = bootstrap_se(good, seed, TAG_POINTWISE, statistic=np.median)
    est = EstimateCI(med, se, len(good), "pointwise-median", seed,
                     {"failed": failed, "admissible_scales": scales[adm].tolist()})
    return PointwiseDimension(slopes, idx, scales, adm, failed, est)


def correlation_dimension(nu, scales=None, seed: int = 0, max_centers: int = 100_000) -> EstimateCI:
    """Grassberger-Procaccia slope of the pair-correlation sum against ``log r``."""
    nu = as_measure(nu)
    N = len(nu)
    if N < 2:
        raise ValueError("correlation dimension needs at least two samples")
    scales = default_scales(nu) if scales is None else np.asarray(scales)
    if N > max_centers:
        idx = np.sort(stream_rng(seed, TAG_CENTERS).choice(N, size=max_centers, replace=False))
    else:
        idx = np.arange(N)
    counts = ball_counts(nu, scales, idx)
    adm = _admissible(counts)
    pairs = (counts - 1) / (N - 1)
    corr = pairs.mean(axis=0)
    x = -scales * math.log(nu.visual_base)
    with np.errstate(divide="ignore"):
        logc = np.log(corr)
    usable = (corr > 0) & adm
    fit = fit_windows(x[adm], logc[adm][None, :], usable[adm][None, :])
    if not np.isfinite(fit.slope[0]):
        raise EstimatorFailure("no valid scaling window for the correlation sum",
                               {"admissible_scales": scales[adm].tolist()})
    cols = np.flatnonzero(adm)[fit.start[0]:fit.stop[0]]
    xw = x[cols]
    sub = pairs[:, cols]

    def stat(rows):
        c = sub[rows].mean(axis=0)
        if np.any(c <= 0):
            return np.nan
        return np.polyfit(xw, np.log(c), 1)[0]

    se = bootstrap_se_indexed(len(idx), stat, seed, TAG_CORRELATION)
    # slope over every admissible scale, with no window selection: a coarse
    # cross-check when the curve is a staircase and plateaus win the window rule
    full = np.flatnonzero(usable)
    full_slope, _, full_r2 = linear_fit(x[full], logc[full]) if len(full) >= 2 else (math.nan, 0.0, 0.0)
    return EstimateCI(float(fit.slope[0]), se, len(idx), "correlation-sum", seed,
                      {"window_scales": scales[cols].tolist(), "residual": float(fit.residual[0]),
                       "full_range_slope": full_slope, "full_range_residual": 1.0 - full_r2})
