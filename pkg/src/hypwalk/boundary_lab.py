"""Cylinders, the finite-multiplicity cover of the tree boundary, and atom diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .estimators import BoundarySet, EmpiricalBoundaryMeasure, open_set_mass
from .estimators.empirical import as_measure
from .estimators.stats import mann_kendall
from .measures import MuKFamily
from .spaces import FreeGroupTree, TreeBoundaryPoint
from .spaces.tree import format_letters, letter_inverse, parse_letters

UNIFORM = "uniform"


@dataclass(frozen=True)
class Cylinder:
    """Boundary points of the tree whose reduced form starts with ``prefix``."""

    prefix: tuple[int, ...]
    rank: int = 2

    def __post_init__(self):
        if not self.prefix:
            raise ValueError("a cylinder needs a nonempty prefix")
        for x, y in zip(self.prefix, self.prefix[1:]):
            if y == letter_inverse(x, self.rank):
                raise ValueError(f"prefix {self.prefix} is not reduced")

    @classmethod
    def parse(cls, text, rank: int = 2) -> "Cylinder":
        return cls(tuple(parse_letters(text, rank)), rank)

    @property
    def depth(self) -> int:
        return len(self.prefix)

    def as_set(self) -> BoundarySet:
        return BoundarySet(cylinders=(self.prefix,))

    def __str__(self) -> str:
        return format_letters(self.prefix, self.rank)


def cylinder_count(rank: int, depth: int) -> int:
    return 2 * rank * (2 * rank - 1) ** (depth - 1)


def cylinder_mass(source, c: Cylinder):
    """Exact uniform mass (a Fraction) or the empirical fraction of samples in ``c``."""
    if isinstance(source, str):
        if source != UNIFORM:
            raise ValueError(f"unknown exact measure {source!r}")
        return Fraction(1, cylinder_count(c.rank, c.depth))
    return open_set_mass(source, c.as_set()).value


def reduced_words(rank: int, n: int) -> np.ndarray:
    """All reduced words of length ``n`` as rows of letters, in lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k2 = 2 * rank
    inv = np.array([0] + [letter_inverse(c, rank) for c in range(1, k2 + 1)], dtype=np.int8)
    words = np.arange(1, k2 + 1, dtype=np.int8)[:, None]
    letters = np.arange(1, k2 + 1, dtype=np.int8)
    for _ in range(n - 1):
        nxt = np.repeat(words, k2, axis=0)
        col = np.tile(letters, len(words))
        keep = col != inv[nxt[:, -1]]
        words = np.concatenate([nxt[keep], col[keep, None]], axis=1)
    return words


def empirical_cylinder_masses(nu, depth: int) -> list[tuple[str, float]]:
    """Empirical mass of every depth-``depth`` cylinder hit by a sample."""
    nu = as_measure(nu)
    if nu.kind != "tree":
        raise ValueError("cylinders live on tree boundaries")
    ok = nu.data.depths >= depth
    rows, counts = np.unique(nu.data.prefixes[ok, :depth], axis=0, return_counts=True)
    n = len(nu)
    return [(format_letters(tuple(int(c) for c in r), nu.data.rank), cnt / n) for r, cnt in zip(rows, counts)]


@dataclass(frozen=True)
class BoundaryCover:
    """One closed visual ball ``B(xi_w, radius)`` per reduced word ``w`` of length ``depth``.

    The center ``xi_w`` continues ``w`` by repeating its last letter.
    """

    depth: int
    rank: int
    radius: float
    visual_base: float
    multiplicity: int
    ball_depth: int  # balls are the cylinders of this depth around their centers

    @property
    def size(self) -> int:
        return cylinder_count(self.rank, self.depth)

    def centers(self) -> list[TreeBoundaryPoint]:
        return [TreeBoundaryPoint(tuple(int(c) for c in w), self.rank, (int(w[-1]),))
                for w in reduced_words(self.rank, self.depth)]

    def covers(self, nu) -> np.ndarray:
        """Per sample: lies in at least one ball (needs sample depth >= min(depth, ball depth))."""
        nu = as_measure(nu)
        need = min(self.depth, self.ball_depth)
        if self.ball_depth <= self.depth:
            # every depth-``ball_depth`` cylinder is the ball of some center
            return nu.data.depths >= need
        # smaller balls only reach points continuing some w by its last letter
        P, d = nu.data.prefixes, nu.data.depths
        tail = P[:, self.depth - 1: self.ball_depth]
        same = (tail == tail[:, :1]).all(axis=1) if tail.shape[1] else np.ones(len(P), dtype=bool)
        return (d >= self.ball_depth) & same


def separation_bound(lam: float, delta: float, visual_base: float) -> float:
    """``4 log_a(lambda) + 4 delta``: how far apart centers of intersecting balls can be."""
    return 4.0 * math.log(lam) / math.log(visual_base) + 4.0 * delta


def build_cover(model: FreeGroupTree, n: int, radius: float | None = None, lam: float = 1.0) -> BoundaryCover:
    """Exhaustive cover at depth ``n``; default radius ``lam * a^-(n-1)``.

    Balls of one radius in an ultrametric space are equal or disjoint, so the
    multiplicity is the largest number of centers sharing a ball.
    """
    if not isinstance(model, FreeGroupTree):
        raise ValueError("the finite-multiplicity cover is implemented for trees only")
    a = model.visual_base
    r = lam * a ** (-(n - 1)) if radius is None else radius
    # B(xi, r) = {eta : (xi|eta) >= t} with t the least integer with a^-t <= r
    t = max(0, math.ceil(-math.log(r) / math.log(a) - 1e-12))
    words = reduced_words(model.rank, n)
    if t > n:
        mult = 1
    elif t == 0:
        mult = len(words)
    else:
        _, counts = np.unique(words[:, :t], axis=0, return_counts=True)
        mult = int(counts.max())
    return BoundaryCover(n, model.rank, r, a, mult, t)


@dataclass(frozen=True)
class AtomRow:
    k: int
    radius: float
    mass: float
    lo: float
    hi: float
    samples: int


@dataclass(frozen=True)
class AtomTable:
    rows: list
    tau: float
    p_value: float

    @property
    def increasing(self) -> bool:
        return self.p_value < 0.05


def atom_region(fam: MuKFamily, radius: float) -> BoundarySet:
    """Balls of ``radius`` around the fixed points and their translates by ``S u {e}``."""
    model = fam.model
    centers = []
    for s in [model.identity(), *model.generators]:
        for pt in (fam.gamma_plus, fam.gamma_minus):
            centers.append(model.act_boundary(s, pt))
    return BoundarySet.visual_balls(centers, radius, model.visual_base)


def atom_concentration(fam: MuKFamily, k_grid, radius: float, nus: dict) -> AtomTable:
    """Harmonic mass near the orbit of the fixed points, per k, with a Mann-Kendall trend test."""
    region = atom_region(fam, radius)
    rows = []
    for k in k_grid:
        ci = open_set_mass(nus[k], region)
        rows.append(AtomRow(int(k), radius, ci.value, ci.lo, ci.hi, ci.n))
    tau, p = mann_kendall([r.mass for r in rows])
    return AtomTable(rows, tau, p)


def write_cylinder_csv(path, depth: int, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["depth", "cylinder", "mass"])
        for name, mass in rows:
            w.writerow([depth, name, repr(float(mass))])


def write_atom_csv(path, tables) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "atom_mass", "radius"])
        for tab in tables:
            for r in tab.rows:
                w.writerow([r.k, repr(r.mass), repr(r.radius)])


__all__ = [
    "AtomTable", "BoundaryCover", "Cylinder", "EmpiricalBoundaryMeasure", "UNIFORM", "atom_concentration",
    "atom_region", "build_cover", "cylinder_count", "cylinder_mass", "empirical_cylinder_masses",
    "reduced_words", "separation_bound", "write_atom_csv", "write_cylinder_csv",
]
