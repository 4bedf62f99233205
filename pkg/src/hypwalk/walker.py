"""Seeded sampling of random-walk trajectories and of truncated boundary limits.

Every trajectory draws its increments from its own PCG64 stream, keyed by
``(master seed, stream tag, trajectory index)``. Batches are therefore
order-insensitive: splitting the index range across threads or chunks
cannot change any trajectory.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimatorFailure, InsufficientResolution, PrecisionError
from .measures import FiniteMeasure
from .spaces import FreeGroupTree, FuchsianHalfPlane, Mobius, SpaceModel, TreeBoundaryPoint
from .spaces.halfplane import IM_FLOOR
from .spaces.tree import letter_inverse

log = logging.getLogger(__name__)

# stream tags keep unrelated consumers of the master seed independent
WALK, BOUNDARY, PILOT = 1, 2, 3


@dataclass(frozen=True)
class WalkConfig:
    steps: int = 1000
    trajectories: int = 1000
    seed: int = 0
    stride: int = 1
    resolution_floor: float = 8.0
    boundary_depth: int = 32
    boundary_steps: int | None = None
    threads: int = 1
    chunk: int = 4096

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.boundary_depth < 1:
            raise ValueError("boundary_depth must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def record_steps(self, n_max: int | None = None) -> np.ndarray:
        n_max = self.steps if n_max is None else n_max
        ns = list(range(0, n_max + 1, self.stride))
        if ns[-1] != n_max:
            ns.append(n_max)
        return np.array(ns)


@dataclass
class Trajectory:
    index: int
    seed_key: tuple
    steps: np.ndarray
    distances: np.ndarray
    positions: list | None = None
    valid: bool = True


@dataclass(frozen=True)
class BoundarySample:
    """Approximate harmonic-measure sample read off ``x_{n_max} o``.

    ``resolution`` is the confluence depth with ``x_{n_max/2}`` on trees and
    ``Im(x_{n_max} i)`` on the half-plane.
    """

    point: object
    truncation: int
    resolution: float

    @property
    def resolution_length(self) -> float:
        """Resolution as a length: confluence depth, or ``-log Im z``."""
        if isinstance(self.point, TreeBoundaryPoint):
            return float(self.resolution)
        return -math.log(self.resolution)


class SampleList(list):
    """List of boundary samples that remembers how many walks were discarded."""

    def __init__(self, items=(), invalid_count=0, n_max=0):
        super().__init__(items)
        self.invalid_count = invalid_count
        self.n_max = n_max


def trajectory_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, index))))


def draw_increments(m: FiniteMeasure, seed: int, stream: int, index: int, steps: int) -> np.ndarray:
    """Support indices of the increments, by inverse CDF on uniform draws."""
    u = trajectory_rng(seed, stream, index).random(steps)
    return np.minimum(np.searchsorted(m.cdf, u, side="right"), len(m) - 1)


def _check_steps(model, steps):
    if isinstance(model, FuchsianHalfPlane) and steps > model.max_steps:
        raise ValueError(f"half-plane walks are capped at {model.max_steps} steps, got {steps}")


def sample_trajectory(m: FiniteMeasure, model: SpaceModel, cfg: WalkConfig, index: int,
                      stream: int = WALK) -> Trajectory:
    """One trajectory ``x_n = h_1 ... h_n``, recorded every ``cfg.stride`` steps."""
    if not 0 <= index < cfg.trajectories:
        raise IndexError(f"trajectory index {index} outside 0..{cfg.trajectories - 1}")
    _check_steps(model, cfg.steps)
    inc = draw_increments(m, cfg.seed, stream, index, cfg.steps)
    record = set(cfg.record_steps().tolist())
    x = model.identity()
    o = model.basepoint
    steps, dists, positions = [0], [0.0], [x]
    valid = True
    for n in range(1, cfg.steps + 1):
        x = model.multiply(x, m.support[inc[n - 1]])
        if n in record:
            try:
                model.act(x, o)
            except PrecisionError:
                valid = False
                break
            steps.append(n)
            dists.append(float(model.norm(x)))
            positions.append(x)
    return Trajectory(index, (cfg.seed, stream, index), np.array(steps), np.array(dists), positions, valid)


# batched engines


class _TreeIncrements:
    def __init__(self, m: FiniteMeasure, model: FreeGroupTree):
        self.rank = model.rank
        L = max(1, max(len(g) for g in m.support))
        self.letters = np.zeros((len(m), L), dtype=np.int16)
        self.lengths = np.zeros(len(m), dtype=np.int64)
        for i, g in enumerate(m.support):
            self.letters[i, : len(g)] = g.letters
            self.lengths[i] = len(g)
        self.inv = np.zeros(2 * self.rank + 1, dtype=np.int16)
        for c in range(1, 2 * self.rank + 1):
            self.inv[c] = letter_inverse(c, self.rank)


def _tree_batch(inc: _TreeIncrements, idx: np.ndarray, record: np.ndarray, keep_mid: bool):
    B, n = idx.shape
    width = max(64, int(inc.lengths.max()) * 64)
    stack = np.zeros((B, width), dtype=np.int16)
    length = np.zeros(B, dtype=np.int64)
    rows = np.arange(B)
    rec_pos = {int(s): j for j, s in enumerate(record)}
    dists = np.zeros((B, len(record)))
    mid_at = n // 2
    mid_stack = mid_len = None
    if 0 in rec_pos:
        dists[:, rec_pos[0]] = 0
    for t in range(n):
        if keep_mid and t == mid_at:
            mid_stack, mid_len = stack[:, : max(1, int(length.max()))].copy(), length.copy()
        ids = idx[:, t]
        lens_t = inc.lengths[ids]
        need = int(length.max() + lens_t.max())
        if need > width:
            width = max(need, 2 * width)
            stack = np.pad(stack, ((0, 0), (0, width - stack.shape[1])))
        for j in range(int(lens_t.max())):
            letter = inc.letters[ids, j]
            active = lens_t > j
            top = stack[rows, np.maximum(length - 1, 0)]
            top = np.where(length > 0, top, 0)
            cancel = active & (top == inc.inv[letter])
            push = active & ~cancel
            length -= cancel
            pr = rows[push]
            stack[pr, length[pr]] = letter[push]
            length[pr] += 1
        j = rec_pos.get(t + 1)
        if j is not None:
            dists[:, j] = length
    if keep_mid and mid_stack is None:  # n == 0 never happens; n == 1 keeps x_0
        mid_stack, mid_len = np.zeros((B, 1), dtype=np.int16), np.zeros(B, dtype=np.int64)
    return dists, stack, length, mid_stack, mid_len


def _confluence(a: np.ndarray, la: np.ndarray, b: np.ndarray, lb: np.ndarray) -> np.ndarray:
    m = np.minimum(la, lb)
    M = int(m.max()) if len(m) else 0
    if M == 0:
        return np.zeros(len(la), dtype=np.int64)
    eq = a[:, :M] == b[:, :M]
    eq &= np.arange(M)[None, :] < m[:, None]
    first_diff = np.where(eq.all(axis=1), M, np.argmin(eq, axis=1))
    return np.minimum(first_diff, m)


def _halfplane_batch(mats: np.ndarray, idx: np.ndarray, record: np.ndarray):
    # increments are unimodular, so products are too; no det renormalisation
    B, n = idx.shape
    M = np.broadcast_to(np.eye(2), (B, 2, 2)).copy()
    valid = np.ones(B, dtype=bool)
    rec_pos = {int(s): j for j, s in enumerate(record)}
    dists = np.zeros((B, len(record)))
    for t in range(n):
        with np.errstate(over="ignore", invalid="ignore"):
            # overflowing rows are caught just below
            M = M @ mats[idx[:, t]]
            cd = M[:, 1, 0] ** 2 + M[:, 1, 1] ** 2
        bad = valid & ~(cd < 1.0 / IM_FLOOR)
        if bad.any():
            valid &= ~bad
            M[bad] = np.eye(2)
        j = rec_pos.get(t + 1)
        if j is not None:
            s = 0.5 * (M ** 2).sum(axis=(1, 2))
            dists[:, j] = np.arccosh(np.maximum(s, 1.0))
    a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    cd = c * c + d * d
    re = (a * c + b * d) / cd
    im = 1.0 / cd
    return dists, re, im, valid


def _chunks(total: int, size: int):
    return [(s, min(total, s + size)) for s in range(0, total, size)]


def _run_chunks(fn, total, cfg):
    chunks = _chunks(total, cfg.chunk)
    if cfg.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


def _increment_block(m, cfg, stream, start, stop, steps):
    return np.stack([draw_increments(m, cfg.seed, stream, i, steps) for i in range(start, stop)])


def walk_distances(m: FiniteMeasure, model: SpaceModel, cfg: WalkConfig, stream: int = WALK):
    """Distances ``|x_n|`` at the recorded steps for all trajectories.

    Returns ``(steps, distances, valid)`` with ``distances`` of shape
    ``(trajectories, len(steps))``. Invalid (precision-aborted) half-plane
    trajectories are flagged, not resampled.
    """
    _check_steps(model, cfg.steps)
    record = cfg.record_steps()
    if isinstance(model, FreeGroupTree):
        inc = _TreeIncrements(m, model)

        def work(chunk):
            idx = _increment_block(m, cfg, stream, *chunk, cfg.steps)
            d = _tree_batch(inc, idx, record, keep_mid=False)[0]
            return d, np.ones(len(d), dtype=bool)
    else:
        mats = np.stack([g.as_array() for g in m.support])

        def work(chunk):
            idx = _increment_block(m, cfg, stream, *chunk, cfg.steps)
            d, _, _, ok = _halfplane_batch(mats, idx, record)
            return d, ok

    parts = _run_chunks(work, cfg.trajectories, cfg)
    dists = np.concatenate([p[0] for p in parts])
    valid = np.concatenate([p[1] for p in parts])
    return record, dists, valid


def export_trajectories_csv(path, steps, dists, valid=None):
    """Write ``(traj_index, n, distance)`` rows; invalid trajectories are skipped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["traj_index", "n", "distance"])
        for i, row in enumerate(dists):
            if valid is not None and not valid[i]:
                continue
            for n, d in zip(steps, row):
                w.writerow([i, int(n), repr(float(d))])


def pilot_escape_rate(m: FiniteMeasure, model: SpaceModel, seed: int, trajectories: int = 64,
                      steps: int = 200) -> float:
    cfg = WalkConfig(steps=min(steps, getattr(model, "max_steps", steps)), trajectories=trajectories,
                     seed=seed, stride=steps)
    _, d, ok = walk_distances(m, model, cfg, stream=PILOT)
    if not ok.any():
        return 0.0
    return float(d[ok, -1].mean() / cfg.steps)


def boundary_steps(m: FiniteMeasure, model: SpaceModel, cfg: WalkConfig) -> int:
    """Truncation depth: configured, else ``max(200, ceil(40 / l_pilot))``."""
    if cfg.boundary_steps is not None:
        return int(cfg.boundary_steps)
    l_hat = pilot_escape_rate(m, model, cfg.seed)
    n = 200 if l_hat <= 0 else max(200, math.ceil(40.0 / l_hat))
    if isinstance(model, FuchsianHalfPlane):
        n = min(n, model.max_steps)
    return n


@dataclass
class BoundaryArrays:
    """Columnar form of a boundary sample set (what the estimators consume)."""

    kind: str
    n_max: int
    invalid_count: int
    # tree
    prefixes: np.ndarray | None = None     # (N, depth) letters, 0-padded
    depths: np.ndarray | None = None       # usable prefix length per sample
    rank: int = 0
    # half-plane
    points: np.ndarray | None = None       # ideal points (floats)
    resolution: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.resolution)


def sample_boundary_arrays(m: FiniteMeasure, model: SpaceModel, cfg: WalkConfig,
                           count: int | None = None) -> BoundaryArrays:
    count = cfg.trajectories if count is None else count
    n_max = boundary_steps(m, model, cfg)
    _check_steps(model, n_max)
    record = np.array([n_max])
    D = cfg.boundary_depth
    if isinstance(model, FreeGroupTree):
        inc = _TreeIncrements(m, model)

        def work(chunk):
            idx = _increment_block(m, cfg, BOUNDARY, *chunk, n_max)
            _, stack, length, mid, mid_len = _tree_batch(inc, idx, record, keep_mid=True)
            conf = _confluence(stack, length, mid, mid_len)
            depth = np.minimum(conf, D)
            pre = np.zeros((len(stack), D), dtype=np.int16)
            w = min(D, stack.shape[1])
            pre[:, :w] = stack[:, :w]
            pre[np.arange(D)[None, :] >= depth[:, None]] = 0
            return pre, depth, conf

        parts = _run_chunks(work, count, cfg)
        pre = np.concatenate([p[0] for p in parts])
        depth = np.concatenate([p[1] for p in parts])
        conf = np.concatenate([p[2] for p in parts])
        ok = depth >= 1
        out = BoundaryArrays("tree", n_max, int((~ok).sum()), prefixes=pre[ok], depths=depth[ok],
                             rank=model.rank, resolution=conf[ok].astype(float))
        floor_metric = conf[ok].astype(float)
    else:
        mats = np.stack([g.as_array() for g in m.support])

        def work(chunk):
            idx = _increment_block(m, cfg, BOUNDARY, *chunk, n_max)
            _, re, im, ok = _halfplane_batch(mats, idx, record)
            return re, im, ok

        parts = _run_chunks(work, count, cfg)
        re = np.concatenate([p[0] for p in parts])
        im = np.concatenate([p[1] for p in parts])
        ok = np.concatenate([p[2] for p in parts])
        out = BoundaryArrays("halfplane", n_max, int((~ok).sum()), points=re[ok], resolution=im[ok])
        floor_metric = -np.log(im[ok])
    bad_frac = out.invalid_count / count
    if bad_frac > 0.01:
        raise EstimatorFailure(
            f"{out.invalid_count} of {count} boundary walks were invalid ({bad_frac:.1%} > 1%)",
            {"invalid": out.invalid_count, "count": count, "n_max": n_max},
        )
    if out.invalid_count:
        log.warning("excluded %d invalid boundary walks out of %d", out.invalid_count, count)
    med = float(np.median(floor_metric)) if len(floor_metric) else 0.0
    if med < cfg.resolution_floor:
        raise InsufficientResolution(
            f"median resolution {med:.2f} below floor {cfg.resolution_floor}; raise boundary_steps"
        )
    return out


def samples_from_arrays(arr: BoundaryArrays) -> SampleList:
    items = []
    if arr.kind == "tree":
        for row, d, r in zip(arr.prefixes, arr.depths, arr.resolution):
            pt = TreeBoundaryPoint(tuple(int(c) for c in row[: int(d)]), arr.rank)
            items.append(BoundarySample(pt, arr.n_max, float(r)))
    else:
        for x, im in zip(arr.points, arr.resolution):
            items.append(BoundarySample(float(x), arr.n_max, float(im)))
    return SampleList(items, arr.invalid_count, arr.n_max)


def sample_boundary(m: FiniteMeasure, model: SpaceModel, cfg: WalkConfig) -> SampleList:
    """``cfg.trajectories`` approximate samples of the harmonic measure.

    Tree samples are prefixes of ``x_{n_max}`` of length
    ``min(confluence with x_{n_max/2}, cfg.boundary_depth)``; half-plane
    samples are ``Re(x_{n_max} i)``. More than 1% invalid walks is a hard
    failure; the invalid count is carried on the returned list.
    """
    return samples_from_arrays(sample_boundary_arrays(m, model, cfg))
