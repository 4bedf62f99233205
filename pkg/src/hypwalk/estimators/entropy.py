"""Exact distance-chain tables on trees and entropy sequences of convolution powers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ResourceError, UnsupportedBackend
from ..measures import SUPPORT_CAP, FiniteMeasure, entropy, iter_convolution_powers
from ..spaces import FreeGroupTree, SpaceModel
from .stats import EstimateCI


def radial_parameters(m: FiniteMeasure, model: SpaceModel) -> tuple[float, float] | None:
    """``(hold, per_generator)`` if ``m`` is a nearest-neighbour radial walk, else None."""
    if not isinstance(model, FreeGroupTree):
        return None
    hold = 0.0
    gens = {}
    for g, p in m:
        if len(g) == 0:
            hold = p
        elif len(g) == 1:
            gens[g.letters[0]] = p
        else:
            return None
    if len(gens) != 2 * model.rank:
        return None
    q = next(iter(gens.values()))
    if any(abs(p - q) > 1e-15 for p in gens.values()):
        return None
    return hold, q


@dataclass(frozen=True)
class RadialTable:
    """Law of ``|x_n|`` for a nearest-neighbour radial walk on the tree.

    ``probs[n, r] = P(|x_n| = r)``; a word of length ``r`` then has
    probability ``probs[n, r] / sphere(r)`` because the walk is radial.
    """

    probs: np.ndarray
    rank: int

    def __post_init__(self):
        sums = self.probs.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise ArithmeticError("radial table rows do not sum to one")

    @classmethod
    def build(cls, hold: float, q: float, rank: int, n_table: int) -> "RadialTable":
        up = (2 * rank - 1) * q
        P = np.zeros((n_table + 1, n_table + 2))
        P[0, 0] = 1.0
        for n in range(n_table):
            cur, nxt = P[n], P[n + 1]
            nxt[:] = hold * cur
            nxt[1] += 2 * rank * q * cur[0]
            nxt[2:] += up * cur[1:-1]
            nxt[:-2] += q * cur[1:-1]
        return cls(P[:, : n_table + 1], rank)

    @property
    def n_table(self) -> int:
        return self.probs.shape[0] - 1

    def log_sphere(self) -> np.ndarray:
        """``log`` of the number of reduced words of each length."""
        r = np.arange(self.probs.shape[1], dtype=float)
        k = self.rank
        out = math.log(2 * k) + (r - 1) * math.log(2 * k - 1)
        out[0] = 0.0
        return out

    def class_counts(self) -> list[int]:
        """Number of reduced words of each length, as exact integers."""
        k = self.rank
        return [1] + [2 * k * (2 * k - 1) ** (r - 1) for r in range(1, self.probs.shape[1])]

    def mean_distance(self, n: int) -> float:
        row = self.probs[n]
        return math.fsum(row * np.arange(len(row)))

    def entropy(self, n: int) -> float:
        row = self.probs[n]
        nz = row > 0
        return -math.fsum(row[nz] * (np.log(row[nz]) - self.log_sphere()[nz]))


@dataclass(frozen=True)
class ExactSequence:
    """``values[i]`` is the n-th term for ``n = i + 1``."""

    values: np.ndarray
    route: str
    raw: np.ndarray  # L(mu^n) or H(mu^n) before dividing by n

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.raw]))

    def limit(self, seed: int = 0) -> EstimateCI:
        """Last increment (an upper bound for subadditive sequences) with its gap to the previous one."""
        inc = self.increments
        gap = abs(inc[-2] - inc[-1]) if len(inc) > 1 else 0.0
        return EstimateCI(float(inc[-1]), float(gap), len(inc), f"exact-{self.route}", seed,
                          {"ratio_at_n": float(self.values[-1])})


def _require_tree(model):
    if not isinstance(model, FreeGroupTree):
        raise UnsupportedBackend(f"exact routes need the tree backend, got {type(model).__name__}")


def escape_rate_exact_tree(m: FiniteMeasure, model: SpaceModel, n_table: int,
                           cap: int = SUPPORT_CAP) -> ExactSequence:
    """``L(mu^n)/n`` for ``n = 1..n_table`` via the distance chain or exact convolution."""
    _require_tree(model)
    if n_table < 1:
        raise ValueError("n_table must be >= 1")
    rad = radial_parameters(m, model)
    if rad is not None:
        tab = RadialTable.build(*rad, model.rank, n_table)
        raw = np.array([tab.mean_distance(n) for n in range(1, n_table + 1)])
        route = "radial"
    else:
        raw = np.array([
            math.fsum(p * len(w) for w, p in masses.items())
            for _, masses, _ in iter_convolution_powers(m, n_table, cap)
        ])
        route = "convolution"
    return ExactSequence(raw / np.arange(1, n_table + 1), route, raw)


def entropy_rate_exact_tree(m: FiniteMeasure, model: SpaceModel, n_table: int,
                            cap: int = SUPPORT_CAP) -> ExactSequence:
    """``H(mu^n)/n`` for ``n = 1..n_table``; radial recursion or exact convolution."""
    _require_tree(model)
    if n_table < 1:
        raise ValueError("n_table must be >= 1")
    rad = radial_parameters(m, model)
    if rad is not None:
        tab = RadialTable.build(*rad, model.rank, n_table)
        raw = np.array([tab.entropy(n) for n in range(1, n_table + 1)])
        route = "radial"
    else:
        try:
            raw = np.array(entropy_profile(m, n_table, cap))
        except ResourceError as exc:
            raise ResourceError(f"{exc}; use a nearest-neighbour radial measure for the radial route") from exc
        route = "convolution"
    return ExactSequence(raw / np.arange(1, n_table + 1), route, raw)


def _dict_entropy(masses: dict) -> float:
    return -math.fsum(p * math.log(p) for p in masses.values() if p > 0)


def entropy_profile(m: FiniteMeasure, n_max: int, cap: int = SUPPORT_CAP, strict: bool = True) -> list[float]:
    """``[H(mu^1), ..., H(mu^n)]``; with ``strict=False`` stops quietly at the support cap."""
    out = []
    try:
        for _, masses, _ in iter_convolution_powers(m, n_max, cap):
            out.append(_dict_entropy(masses))
    except ResourceError:
        if strict or not out:
            raise
    return out


def entropy_upper_bound(m: FiniteMeasure, n_max: int = 8, cap: int = SUPPORT_CAP) -> float:
    """Certified upper bound on the asymptotic entropy.

    Both ``H(mu^n)/n`` and the increments ``H(mu^n) - H(mu^(n-1))`` decrease
    to the asymptotic entropy, so the smallest value seen over the computed
    powers bounds it from above. Falls back to ``H(mu)`` when nothing
    beyond the first power fits under ``cap``.
    """
    if len(m) == 1:
        return 0.0
    try:
        prof = entropy_profile(m, n_max, cap, strict=False)
    except ResourceError:
        return entropy(m)
    best = prof[0]
    for n in range(2, len(prof) + 1):
        best = min(best, prof[n - 1] / n, prof[n - 1] - prof[n - 2])
    return float(best)
