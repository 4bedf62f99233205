"""Free group of rank k acting on its Cayley tree.

Generators are numbered ``1..2k``; ``i`` and ``i + k`` are mutually
inverse. In text form generator ``i <= k`` is the ``i``-th lowercase
letter and its inverse the matching uppercase letter, so ``"aB"`` is
``(1, 4)`` in rank 2.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InsufficientResolution, StructuralError
from .base import Classification, SpaceModel


def letter_inverse(c: int, rank: int) -> int:
    return c + rank if c <= rank else c - rank


def reduce_letters(letters: Sequence[int], rank: int) -> tuple[int, ...]:
    out: list[int] = []
    for c in letters:
        if out and out[-1] == letter_inverse(c, rank):
            out.pop()
        else:
            out.append(c)
    return tuple(out)


def reduced_product(u: tuple, v: tuple, rank: int) -> tuple:
    """Free reduction of ``u v`` for already reduced ``u`` and ``v``."""
    n = 0
    m = min(len(u), len(v))
    while n < m and u[-1 - n] == letter_inverse(v[n], rank):
        n += 1
    return u[: len(u) - n] + v[n:]


def common_prefix(u: Sequence[int], v: Sequence[int]) -> int:
    n = 0
    for x, y in zip(u, v):
        if x != y:
            break
        n += 1
    return n


def format_letters(letters: Sequence[int], rank: int) -> str:
    if not letters:
        return "e"
    if rank > 26:
        return ".".join(map(str, letters))
    return "".join(
        string.ascii_lowercase[c - 1] if c <= rank else string.ascii_uppercase[c - rank - 1]
        for c in letters
    )


def parse_letters(spec, rank: int) -> tuple[int, ...]:
    """Accept ``"aB"``, ``"e"``/``""`` or an iterable of generator indices."""
    if isinstance(spec, str):
        text = spec.strip()
        if text in ("", "e", "1"):
            return ()
        letters = []
        for ch in text:
            if ch.islower() and ch in string.ascii_lowercase[:rank]:
                letters.append(string.ascii_lowercase.index(ch) + 1)
            elif ch.isupper() and ch in string.ascii_uppercase[:rank]:
                letters.append(string.ascii_uppercase.index(ch) + 1 + rank)
            else:
                raise ValueError(f"letter {ch!r} is not a generator of the rank-{rank} free group")
        return tuple(letters)
    letters = tuple(int(c) for c in spec)
    for c in letters:
        if not 1 <= c <= 2 * rank:
            raise ValueError(f"generator index {c} outside 1..{2 * rank}")
    return letters


@dataclass(frozen=True)
class Word:
    """Reduced word in the free group; doubles as a vertex of the tree."""

    letters: tuple[int, ...]
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "letters", reduce_letters(tuple(self.letters), self.rank))

    def __mul__(self, other: "Word") -> "Word":
        if not isinstance(other, Word) or other.rank != self.rank:
            raise StructuralError("cannot multiply words from different free groups")
        return _word(reduced_product(self.letters, other.letters, self.rank), self.rank)

    def inverse(self) -> "Word":
        return _word(tuple(letter_inverse(c, self.rank) for c in reversed(self.letters)), self.rank)

    def __len__(self) -> int:
        return len(self.letters)

    def key(self) -> tuple:
        return self.letters

    def __str__(self) -> str:
        return format_letters(self.letters, self.rank)


def _word(letters: tuple, rank: int) -> Word:
    # skips re-reduction for letters known to be reduced
    w = object.__new__(Word)
    object.__setattr__(w, "letters", letters)
    object.__setattr__(w, "rank", rank)
    return w


@dataclass(frozen=True)
class TreeBoundaryPoint:
    """End of the tree.

    Either a depth-stamped prefix (a cylinder representative, ``period``
    empty) or the exact eventually periodic end ``prefix period period ...``.
    """

    prefix: tuple[int, ...]
    rank: int
    period: tuple[int, ...] = field(default=())

    def __post_init__(self):
        prefix, period, rank = tuple(self.prefix), tuple(self.period), self.rank
        if period:
            if reduce_letters(period + period, rank) != period + period:
                raise ValueError("period must be cyclically reduced")
            # minimal period
            n = len(period)
            for d in range(1, n + 1):
                if n % d == 0 and period[:d] * (n // d) == period:
                    period = period[:d]
                    break
            # shortest prefix
            while prefix and prefix[-1] == period[-1]:
                prefix = prefix[:-1]
                period = period[-1:] + period[:-1]
        elif not prefix:
            raise ValueError("a truncated boundary point needs depth >= 1")
        if reduce_letters(prefix + period, rank) != prefix + period:
            raise ValueError("boundary prefix must be reduced")
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "period", period)

    @property
    def depth(self) -> float:
        return math.inf if self.period else len(self.prefix)

    @property
    def is_exact(self) -> bool:
        return bool(self.period)

    def head(self, n: int) -> tuple[int, ...]:
        """First ``n`` letters."""
        if n <= len(self.prefix):
            return self.prefix[:n]
        if not self.period:
            raise InsufficientResolution(f"need depth {n}, boundary point has depth {len(self.prefix)}")
        extra = n - len(self.prefix)
        reps = -(-extra // len(self.period))
        return (self.prefix + self.period * reps)[:n]

    def __str__(self) -> str:
        head = format_letters(self.prefix, self.rank) if self.prefix else ""
        if self.period:
            return f"{head}({format_letters(self.period, self.rank)})^inf"
        return f"{head}..."


class FreeGroupTree(SpaceModel):
    """Cayley tree of the free group of the given rank (a 0-hyperbolic space)."""

    kind = "free_group"

    def __init__(self, rank: int = 2, visual_base: float = math.e):
        if rank < 1:
            raise ValueError("rank must be >= 1")
        super().__init__(0.0, visual_base)
        self.rank = rank

    def __repr__(self):
        return f"FreeGroupTree(rank={self.rank}, visual_base={self.visual_base})"

    @property
    def growth(self) -> float:
        """Exponential growth rate ``log(2k - 1)`` of balls in the tree."""
        return math.log(2 * self.rank - 1)

    # group
    def identity(self) -> Word:
        return _word((), self.rank)

    @property
    def generators(self) -> list[Word]:
        return [_word((i,), self.rank) for i in range(1, 2 * self.rank + 1)]

    def word(self, spec) -> Word:
        return Word(parse_letters(spec, self.rank), self.rank)

    parse_element = word

    def _check_word(self, g, what="element"):
        self._require(g, Word, what)
        if g.rank != self.rank:
            raise StructuralError(f"{what} lives in rank {g.rank}, model has rank {self.rank}")

    def multiply(self, g: Word, h: Word) -> Word:
        self._check_word(g)
        self._check_word(h)
        return g * h

    def inverse(self, g: Word) -> Word:
        self._check_word(g)
        return g.inverse()

    def power(self, g: Word, n: int) -> Word:
        self._check_word(g)
        if n < 0:
            g, n = g.inverse(), -n
        u, c = self._cyclic_split(g.letters)
        if not c:
            return self.identity()
        inv_u = tuple(letter_inverse(x, self.rank) for x in reversed(u))
        return _word(u + c * n + inv_u if n else (), self.rank)

    def element_key(self, g: Word) -> tuple:
        return g.letters

    # space
    @property
    def basepoint(self) -> Word:
        return self.identity()

    def act(self, g: Word, p: Word) -> Word:
        self._check_word(g)
        self._check_word(p, "point")
        return g * p

    def act_boundary(self, g: Word, xi: TreeBoundaryPoint) -> TreeBoundaryPoint:
        self._check_word(g)
        self._require(xi, TreeBoundaryPoint, "boundary point")
        if xi.period:
            reps = len(g) // len(xi.period) + 2
            body = xi.prefix + xi.period * reps
        else:
            body = xi.prefix
        n = 0
        while n < min(len(g), len(body)) and g.letters[-1 - n] == letter_inverse(body[n], self.rank):
            n += 1
        if n == len(body):
            raise InsufficientResolution("translation cancels the whole known prefix")
        return TreeBoundaryPoint(g.letters[: len(g) - n] + body[n:], self.rank, xi.period)

    def distance(self, p: Word, q: Word) -> int:
        self._check_word(p, "point")
        self._check_word(q, "point")
        n = common_prefix(p.letters, q.letters)
        return len(p) + len(q) - 2 * n

    def norm(self, g: Word) -> int:
        return len(g)

    def gromov_product(self, p, q, base=None):
        """Gromov product at ``base`` (default: the identity vertex).

        Vertices give the usual integer formula. Boundary arguments are
        resolved through prefix confluence; if the available depth cannot
        separate the arguments, :class:`InsufficientResolution` is raised.
        Two identical exact ends give ``inf``.
        """
        if base is not None and len(base):
            self._check_word(base, "base")
            b_inv = base.inverse()
            p = self._translate(b_inv, p)
            q = self._translate(b_inv, q)
        p_bd = isinstance(p, TreeBoundaryPoint)
        q_bd = isinstance(q, TreeBoundaryPoint)
        if not p_bd and not q_bd:
            self._check_word(p, "point")
            self._check_word(q, "point")
            return common_prefix(p.letters, q.letters)
        if p_bd and q_bd:
            return self._boundary_confluence(p, q)
        u, xi = (q, p) if p_bd else (p, q)
        self._check_word(u, "point")
        self._require(xi, TreeBoundaryPoint, "boundary point")
        m = int(min(len(u), xi.depth))
        n = common_prefix(u.letters[:m], xi.head(m))
        if n < m or m == len(u):
            return n
        raise InsufficientResolution(
            f"boundary depth {xi.depth} cannot resolve a vertex of length {len(u)}"
        )

    def _translate(self, g, p):
        if isinstance(p, TreeBoundaryPoint):
            return self.act_boundary(g, p)
        return self.act(g, p)

    def _boundary_confluence(self, xi: TreeBoundaryPoint, eta: TreeBoundaryPoint):
        for pt in (xi, eta):
            if pt.rank != self.rank:
                raise StructuralError("boundary point from a different free group")
        if xi.period and eta.period:
            if xi == eta:
                return math.inf
            m = max(len(xi.prefix), len(eta.prefix)) + len(xi.period) * len(eta.period) + 1
        else:
            m = int(min(xi.depth, eta.depth))
        n = common_prefix(xi.head(m), eta.head(m))
        if n < m:
            return n
        raise InsufficientResolution(f"boundary points agree on all {m} available letters")

    def busemann(self, xi: TreeBoundaryPoint, x: Word, y: Word) -> int:
        """``|y| - 2 (y|xi) - |x| + 2 (x|xi)``; an exact integer cocycle."""
        self._require(xi, TreeBoundaryPoint, "boundary point")
        return len(y) - 2 * self.gromov_product(y, xi) - len(x) + 2 * self.gromov_product(x, xi)

    def _cyclic_split(self, letters):
        j, n = 0, len(letters)
        while j < n - 1 - j and letters[j] == letter_inverse(letters[n - 1 - j], self.rank):
            j += 1
        return letters[:j], letters[j : n - j]

    def classify_hyperbolic(self, g: Word) -> Classification:
        self._check_word(g)
        u, c = self._cyclic_split(g.letters)
        if not c:
            return Classification("elliptic")
        c_inv = tuple(letter_inverse(x, self.rank) for x in reversed(c))
        return Classification(
            "hyperbolic",
            TreeBoundaryPoint(u, self.rank, c),
            TreeBoundaryPoint(u, self.rank, c_inv),
        )

    def random_points(self, rng, count, radius):
        r = max(int(radius), 0)
        lengths = rng.integers(0, r + 1, size=count)
        out = []
        for n in lengths:
            letters = []
            for _ in range(int(n)):
                choices = [c for c in range(1, 2 * self.rank + 1)
                           if not letters or c != letter_inverse(letters[-1], self.rank)]
                letters.append(choices[int(rng.integers(len(choices)))])
            out.append(_word(tuple(letters), self.rank))
        return out

    def random_boundary_points(self, rng, count, depth) -> list[TreeBoundaryPoint]:
        """Uniform-measure cylinder representatives of the given depth."""
        out = []
        for _ in range(count):
            letters = [int(rng.integers(1, 2 * self.rank + 1))]
            while len(letters) < depth:
                choices = [c for c in range(1, 2 * self.rank + 1)
                           if c != letter_inverse(letters[-1], self.rank)]
                letters.append(choices[int(rng.integers(len(choices)))])
            out.append(TreeBoundaryPoint(tuple(letters), self.rank))
        return out

    def gromov_product_array(self, xs, ys, base):
        return np.array([self.gromov_product(x, y, b) for x, y, b in zip(xs, ys, base)], dtype=np.int64)
