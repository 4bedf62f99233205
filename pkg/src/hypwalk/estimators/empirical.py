"""Empirical harmonic measures and vectorised boundary geometry on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientResolution, StructuralError
from ..spaces import Mobius, TreeBoundaryPoint, Word
from ..spaces.tree import parse_letters
from ..walker import BoundaryArrays, BoundarySample, SampleList, samples_from_arrays

# periodic (exact) tree points are unrolled to this many letters
EXPAND_DEPTH = 256


@dataclass(frozen=True)
class BoundarySet:
    """A region of the boundary: finite unions of tree cylinders or of arcs.

    ``intervals`` are closed ``(lo, hi)`` pairs of real ideal points; an
    interval with ``lo > hi`` wraps through infinity.
    """

    cylinders: tuple = ()
    intervals: tuple = ()
    whole: bool = False
    balls: tuple = ()  # (center, t): points with Gromov product >= t with the center

    def __post_init__(self):
        # on trees a ball is a cylinder; fold it in so one code path handles both
        extra = tuple(
            tuple(c.head(math.ceil(t))) for c, t in self.balls if isinstance(c, TreeBoundaryPoint)
        )
        if extra:
            object.__setattr__(self, "cylinders", self.cylinders + extra)
            object.__setattr__(self, "balls", tuple(b for b in self.balls if not isinstance(b[0], TreeBoundaryPoint)))

    @classmethod
    def everything(cls) -> "BoundarySet":
        return cls(whole=True)

    @classmethod
    def cylinder(cls, *prefixes, rank: int = 2) -> "BoundarySet":
        cyl = tuple(tuple(parse_letters(p, rank)) for p in prefixes)
        if any(len(c) == 0 for c in cyl):
            raise ValueError("a cylinder needs a nonempty prefix")
        return cls(cylinders=cyl)

    @classmethod
    def visual_balls(cls, centers, radius: float, visual_base: float = math.e) -> "BoundarySet":
        """Union of closed balls ``{eta : a^-(xi|eta) <= radius}``."""
        t = -math.log(radius) / math.log(visual_base)
        return cls(balls=tuple((c, t) for c in centers))

    @classmethod
    def arcs(cls, *intervals) -> "BoundarySet":
        return cls(intervals=tuple((float(lo), float(hi)) for lo, hi in intervals))

    def contains(self, point) -> bool:
        """Membership of one point; raises if a tree point is too shallow to decide."""
        if self.whole:
            return True
        if isinstance(point, TreeBoundaryPoint):
            for c in self.cylinders:
                if len(c) > point.depth and tuple(point.head(int(point.depth))) == c[: int(point.depth)]:
                    raise InsufficientResolution(f"{point} is too shallow to test cylinder {c}")
                if len(c) <= point.depth and point.head(len(c)) == c:
                    return True
            return False
        x = np.array([float(point)])
        return bool(any(_in_interval(x, lo, hi)[0] for lo, hi in self.intervals)
                    or any(_in_ball(x, c, t)[0] for c, t in self.balls))


def _in_interval(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if lo <= hi:
        return (x >= lo) & (x <= hi)
    return (x >= lo) | (x <= hi) | np.isinf(x)


def _angle(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        th = np.arctan2(-2.0 * x, x * x - 1.0)
    return np.where(np.isinf(x), 0.0, th)


def _in_ball(x: np.ndarray, center: float, t: float) -> np.ndarray:
    # Gromov product >= t  <=>  half-chord <= e^-t  <=>  angular gap <= 2 asin(e^-t)
    gap = np.abs(_angle(x) - _angle(np.array([float(center)]))[0])
    gap = np.minimum(gap, 2 * np.pi - gap)
    return gap <= 2.0 * math.asin(min(1.0, math.exp(-t))) * (1 + 1e-12)


def _log1p_sq(x: np.ndarray) -> np.ndarray:
    """``log(1 + x^2)`` without overflow for huge ``|x|``."""
    with np.errstate(divide="ignore"):
        return np.logaddexp(0.0, 2.0 * np.log(np.abs(x)))


class EmpiricalBoundaryMeasure:
    """Uniform measure on boundary samples, with the visual base ``a``."""

    def __init__(self, data: BoundaryArrays, visual_base: float = math.e):
        if len(data) == 0:
            raise ValueError("empirical boundary measure needs at least one sample")
        if not visual_base > 1:
            raise ValueError("visual base must exceed 1")
        self.data = data
        self.visual_base = float(visual_base)

    @classmethod
    def from_samples(cls, samples, visual_base: float = math.e, rank: int | None = None):
        samples = list(samples)
        if not samples:
            raise ValueError("empirical boundary measure needs at least one sample")
        invalid = getattr(samples, "invalid_count", 0)
        n_max = max(s.truncation for s in samples)
        if isinstance(samples[0].point, TreeBoundaryPoint):
            rank = samples[0].point.rank if rank is None else rank
            depth = np.array([int(min(s.point.depth, EXPAND_DEPTH)) for s in samples])
            D = int(depth.max())
            pre = np.zeros((len(samples), D), dtype=np.int16)
            for i, s in enumerate(samples):
                pre[i, : depth[i]] = s.point.head(int(depth[i]))
            res = np.array([s.resolution for s in samples], dtype=float)
            data = BoundaryArrays("tree", n_max, invalid, prefixes=pre, depths=depth, rank=rank, resolution=res)
        else:
            pts = np.array([float(s.point) for s in samples])
            res = np.array([s.resolution for s in samples], dtype=float)
            data = BoundaryArrays("halfplane", n_max, invalid, points=pts, resolution=res)
        return cls(data, visual_base)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def kind(self) -> str:
        return self.data.kind

    @property
    def samples(self) -> SampleList:
        return samples_from_arrays(self.data)

    @property
    def invalid_count(self) -> int:
        return self.data.invalid_count

    def resolution_summary(self) -> dict:
        r = self.data.resolution
        if self.kind == "halfplane":
            r = -np.log(r)
        return {"median": float(np.median(r)), "min": float(r.min()), "invalid": self.invalid_count}

    # geometry

    def _tree_prefix_match(self, letters: tuple) -> tuple[np.ndarray, np.ndarray]:
        """Common-prefix length with a finite word, and where it is undetermined."""
        P, depth = self.data.prefixes, self.data.depths
        L = len(letters)
        W = min(L, P.shape[1])
        if W == 0:
            cp = np.zeros(len(P), dtype=np.int64)
        else:
            eq = P[:, :W] == np.asarray(letters[:W], dtype=np.int16)[None, :]
            eq &= np.arange(W)[None, :] < depth[:, None]
            cp = np.where(eq.all(axis=1), W, np.argmin(eq, axis=1))
        cp = np.minimum(cp, depth)
        unresolved = (cp == depth) & (depth < L)
        return cp, unresolved

    def _check_kind(self, g):
        if self.kind == "tree" and not isinstance(g, Word):
            raise StructuralError("tree boundary samples need word elements")
        if self.kind == "halfplane" and not isinstance(g, Mobius):
            raise StructuralError("half-plane boundary samples need matrix elements")

    def gromov_with(self, g) -> tuple[np.ndarray, np.ndarray]:
        """``(g o | xi)_o`` for every sample ``xi``, plus the undetermined mask."""
        self._check_kind(g)
        if self.kind == "tree":
            cp, bad = self._tree_prefix_match(g.letters)
            return cp.astype(float), bad
        z = _act_i(g)
        xi = self.data.points
        d = 2.0 * math.asinh(abs(z - 1j) / (2.0 * math.sqrt(z.imag)))
        beta = _log_poisson_i(xi) - _log_poisson(z, xi)
        gp = 0.5 * (d + beta)
        return gp, ~np.isfinite(gp)

    def busemann_from_origin(self, g) -> tuple[np.ndarray, np.ndarray]:
        """``beta_xi(o, g o)`` for every sample, plus the undetermined mask."""
        self._check_kind(g)
        if self.kind == "tree":
            cp, bad = self._tree_prefix_match(g.letters)
            return (len(g) - 2.0 * cp), bad
        z = _act_i(g)
        beta = _log_poisson(z, self.data.points) - _log_poisson_i(self.data.points)
        return beta, ~np.isfinite(beta)

    def membership(self, U: BoundarySet) -> tuple[np.ndarray, np.ndarray]:
        """Boolean ``xi in U`` per sample, plus the undetermined mask."""
        n = len(self)
        if U.whole:
            return np.ones(n, dtype=bool), np.zeros(n, dtype=bool)
        inside = np.zeros(n, dtype=bool)
        unresolved = np.zeros(n, dtype=bool)
        if self.kind == "tree":
            if U.intervals or U.balls:
                raise StructuralError("half-plane regions do not apply to tree samples")
            for c in U.cylinders:
                cp, bad = self._tree_prefix_match(c)
                inside |= cp >= len(c)
                unresolved |= bad
        else:
            if U.cylinders:
                raise StructuralError("cylinder regions do not apply to half-plane samples")
            for lo, hi in U.intervals:
                inside |= _in_interval(self.data.points, lo, hi)
            for c, t in U.balls:
                inside |= _in_ball(self.data.points, c, t)
        return inside, unresolved & ~inside

    def angles(self) -> np.ndarray:
        """Angles of the samples on the unit circle after the Cayley map."""
        return _angle(self.data.points)


def _act_i(g: Mobius) -> complex:
    den = complex(g.d, g.c)
    q = den.real ** 2 + den.imag ** 2
    return complex(((complex(g.b, g.a)) * den.conjugate()).real / q, 1.0 / q)


def _log_poisson(z: complex, xi: np.ndarray) -> np.ndarray:
    """``log(|z - xi|^2 / Im z)``; minus ``log Im z`` at infinity."""
    with np.errstate(divide="ignore"):
        out = 2.0 * np.log(np.hypot(z.real - xi, z.imag)) - math.log(z.imag)
    return np.where(np.isinf(xi), -math.log(z.imag), out)


def _log_poisson_i(xi: np.ndarray) -> np.ndarray:
    return np.where(np.isinf(xi), 0.0, _log1p_sq(xi))


def as_measure(samples, visual_base: float = math.e) -> EmpiricalBoundaryMeasure:
    if isinstance(samples, EmpiricalBoundaryMeasure):
        return samples
    if isinstance(samples, BoundaryArrays):
        return EmpiricalBoundaryMeasure(samples, visual_base)
    return EmpiricalBoundaryMeasure.from_samples(samples, visual_base)


__all__ = ["BoundarySet", "EmpiricalBoundaryMeasure", "BoundarySample", "as_measure"]
