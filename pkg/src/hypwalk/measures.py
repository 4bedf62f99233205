"""Finitely supported probability measures on the acting group."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import CollisionError, ResourceError, StructuralError
from .spaces import Classification, SpaceModel, Word
from .spaces.tree import reduced_product

SUPPORT_CAP = 10**6


def _order(g) -> tuple:
    k = g.key()
    return (len(k), k)


@dataclass(frozen=True)
class FiniteMeasure:
    """Probability measure with finite support.

    ``support`` is kept in canonical order (by canonical key), which fixes
    the inverse-CDF used by the walker.
    """

    support: tuple
    mass: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.mass):
            raise ValueError("support and mass must have the same length")
        if not self.support:
            raise ValueError("empty measure")
        if any(not p > 0 for p in self.mass):
            raise ValueError("masses must be strictly positive")
        total = math.fsum(self.mass)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {total!r}, not 1")
        keys = [g.key() for g in self.support]
        if len(set(keys)) != len(keys):
            raise ValueError("support elements must be distinct")

    @classmethod
    def from_pairs(cls, pairs: Iterable, normalize: bool = False) -> "FiniteMeasure":
        """Build from ``(element, mass)`` pairs, merging equal elements."""
        acc: dict = {}
        reps: dict = {}
        for g, p in pairs:
            k = g.key()
            reps.setdefault(k, g)
            acc[k] = acc.get(k, 0.0) + float(p)
        acc = {k: p for k, p in acc.items() if p > 0}
        if normalize:
            total = math.fsum(acc.values())
            acc = {k: p / total for k, p in acc.items()}
        items = sorted(((reps[k], p) for k, p in acc.items()), key=lambda t: _order(t[0]))
        return cls(tuple(g for g, _ in items), tuple(p for _, p in items))

    def __len__(self) -> int:
        return len(self.support)

    def __iter__(self) -> Iterator:
        return iter(zip(self.support, self.mass))

    def mass_of(self, g) -> float:
        k = g.key()
        for h, p in self:
            if h.key() == k:
                return p
        return 0.0

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.mass)
        c[-1] = 1.0
        return c

    @property
    def symmetric(self) -> bool:
        lookup = {g.key(): p for g, p in self}
        return all(abs(lookup.get(g.inverse().key(), 0.0) - p) <= 1e-12 for g, p in self)

    @property
    def max_step(self) -> int:
        """Longest support word (tree backends only)."""
        return max(len(g) for g in self.support)


@dataclass(frozen=True)
class MuKFamily:
    """Base measure plus a hyperbolic element, spawning ``mu_k`` measures."""

    base: FiniteMeasure
    gamma0: object
    model: SpaceModel
    check_generation: bool = True

    def __post_init__(self):
        cls = self.model.classify_hyperbolic(self.gamma0)
        if not cls.is_hyperbolic:
            raise ValueError(f"gamma0 = {self.gamma0} is not hyperbolic")
        if self.check_generation and not generates_ball(self.base, self.model):
            raise ValueError("base support does not reach the radius-2 ball of the generating set")

    @property
    def fixed_points(self) -> Classification:
        return self.model.classify_hyperbolic(self.gamma0)

    @property
    def gamma_plus(self):
        return self.fixed_points.attracting

    @property
    def gamma_minus(self):
        return self.fixed_points.repelling

    def gamma(self, k: int):
        """The element ``gamma0 ** k`` (negative ``k`` allowed)."""
        return self.model.power(self.gamma0, k)

    def measure(self, k: int) -> FiniteMeasure:
        return make_mu_k(self, k)


def point_mass(g) -> FiniteMeasure:
    return FiniteMeasure((g,), (1.0,))


def uniform(elements) -> FiniteMeasure:
    elements = list(elements)
    return FiniteMeasure.from_pairs((g, 1.0 / len(elements)) for g in elements)


def simple_random_walk(model: SpaceModel) -> FiniteMeasure:
    """Uniform measure on the symmetric generating set."""
    return uniform(model.generators)


def lazy(m: FiniteMeasure, model: SpaceModel, hold: float = 0.5) -> FiniteMeasure:
    pairs = [(g, (1 - hold) * p) for g, p in m] + [(model.identity(), hold)]
    return FiniteMeasure.from_pairs(pairs)


def entropy(m: FiniteMeasure) -> float:
    """Shannon entropy in nats."""
    return -math.fsum(p * math.log(p) for p in m.mass)


def first_moment(m: FiniteMeasure, model: SpaceModel) -> float:
    return math.fsum(p * model.norm(g) for g, p in m)


def make_mu_k(fam: MuKFamily, k: int) -> FiniteMeasure:
    """``mu_k = mu/2 + (delta_{g^k} + delta_{g^-k})/4`` for ``g = gamma0``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    pairs = [(g, 0.5 * p) for g, p in fam.base]
    pairs.append((fam.gamma(k), 0.25))
    pairs.append((fam.gamma(-k), 0.25))
    return FiniteMeasure.from_pairs(pairs)


def mu_k_entropy_bound(base: FiniteMeasure) -> float:
    """Constant bound ``3 log 2 / 2 + H(mu) / 2`` on ``H(mu_k)``, valid for every k."""
    return 1.5 * math.log(2) + 0.5 * entropy(base)


class _MatrixBuckets:
    """Dedup for matrix elements: quantised key plus an exact-closeness check."""

    def __init__(self):
        self.reps: dict = {}

    def key(self, g):
        k = g.key()
        rep = self.reps.get(k)
        if rep is None:
            self.reps[k] = g
            return k
        scale = max(1.0, abs(rep.a), abs(rep.b), abs(rep.c), abs(rep.d))
        diff = min(
            max(abs(rep.a - s * g.a), abs(rep.b - s * g.b), abs(rep.c - s * g.c), abs(rep.d - s * g.d))
            for s in (1.0, -1.0)
        )
        if diff > 1e-11 * scale:
            raise CollisionError(
                f"matrices {rep} and {g} share key {k} but differ by {diff:.3e} "
                f"(relative {diff / scale:.3e}); refusing to merge"
            )
        return k


def iter_convolution_powers(m: FiniteMeasure, n_max: int, cap: int = SUPPORT_CAP):
    """Yield ``(n, masses, reps)`` for ``mu^n``, ``n = 1..n_max``.

    ``masses`` maps canonical keys to probabilities. For words the keys are
    the letter tuples themselves and ``reps`` is None; for matrices ``reps``
    maps keys to representative elements. Raises :class:`ResourceError` once the
    support would exceed ``cap``.
    """
    words = all(isinstance(g, Word) for g in m.support)
    if words:
        rank = m.support[0].rank
        base = [(g.letters, p) for g, p in m]
        cur = dict(base)
        yield 1, cur, None
        for n in range(2, n_max + 1):
            nxt: dict = defaultdict(float)
            for u, p in cur.items():
                for v, q in base:
                    nxt[reduced_product(u, v, rank)] += p * q
                if len(nxt) > cap:
                    raise ResourceError(f"support of mu^{n} exceeds cap {cap}")
            cur = dict(nxt)
            yield n, cur, None
        return
    buckets = _MatrixBuckets()
    base = [(g, buckets.key(g), p) for g, p in m]
    cur = {k: p for _, k, p in base}
    yield 1, cur, buckets.reps
    for n in range(2, n_max + 1):
        nxt = defaultdict(float)
        for k1, p in cur.items():
            g = buckets.reps[k1]
            for h, _, q in base:
                nxt[buckets.key(g * h)] += p * q
            if len(nxt) > cap:
                raise ResourceError(f"support of mu^{n} exceeds cap {cap}")
        cur = dict(nxt)
        yield n, cur, buckets.reps


def convolve(m1: FiniteMeasure, m2: FiniteMeasure, cap: int = SUPPORT_CAP) -> FiniteMeasure:
    """Law of ``g h`` for independent ``g ~ m1`` and ``h ~ m2``."""
    kinds = {type(g) for g in m1.support} | {type(g) for g in m2.support}
    if len(kinds) != 1:
        raise StructuralError(
            f"cannot convolve measures on different backends: {sorted(k.__name__ for k in kinds)}"
        )
    buckets = _MatrixBuckets() if not issubclass(kinds.pop(), Word) else None
    acc: dict = defaultdict(float)
    reps: dict = {}
    for g, p in m1:
        for h, q in m2:
            gh = g * h
            k = buckets.key(gh) if buckets else gh.key()
            reps.setdefault(k, gh)
            acc[k] += p * q
        if len(acc) > cap:
            raise ResourceError(f"convolution support exceeds cap {cap}")
    total = math.fsum(acc.values())
    return FiniteMeasure.from_pairs(((reps[k], p / total) for k, p in acc.items()))


def generates_ball(m: FiniteMeasure, model: SpaceModel, radius: int = 2, factors: int = 4) -> bool:
    """Partial check that ``supp(m)`` and its inverses generate the group.

    Passes when every product of at most ``radius`` generators appears
    among products of at most ``factors`` elements of the symmetrised
    support. Full verification is undecidable in general; this only rules
    out obviously degenerate supports.
    """
    sym = {model.element_key(g): g for g in m.support}
    for g in list(sym.values()):
        sym.setdefault(model.element_key(model.inverse(g)), model.inverse(g))
    steps = list(sym.values())
    reached = {model.element_key(model.identity()): model.identity()}
    frontier = dict(reached)
    for _ in range(factors):
        new = {}
        for g in frontier.values():
            for s in steps:
                h = model.multiply(g, s)
                k = model.element_key(h)
                if k not in reached and k not in new:
                    new[k] = h
        reached.update(new)
        frontier = new
        if len(reached) > 200_000:
            break
    ball = {model.element_key(model.identity())}
    layer = [model.identity()]
    for _ in range(radius):
        layer = [model.multiply(g, s) for g in layer for s in model.generators]
        ball.update(model.element_key(g) for g in layer)
    return ball <= set(reached)
