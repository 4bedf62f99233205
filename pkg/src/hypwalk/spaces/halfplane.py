"""Upper half-plane with a group of Möbius transformations.

Points are Python complex numbers with positive imaginary part; boundary
points are floats, ``math.inf`` standing for the point at infinity. The
basepoint is ``i``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InsufficientResolution, PrecisionError, StructuralError
from .base import Classification, SpaceModel

IM_FLOOR = 1e-300
DET_TOL = 1e-8


@dataclass(frozen=True)
class Mobius:
    """Real 2x2 matrix of determinant one, acting by ``z -> (az+b)/(cz+d)``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        # ad - bc cancels badly once entries are large; within the rounding
        # bound the matrix is taken to be unimodular already
        tol = DET_TOL * (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c, self.d)):
            raise ValueError(f"matrix must have finite entries, got {self}")
        if not math.isfinite(tol) or not math.isfinite(det):
            raise PrecisionError(f"matrix entries of {self} are beyond double precision")
        if abs(det - 1.0) <= tol:
            return
        if not det > tol:
            raise ValueError(f"matrix must have positive determinant, got {det}")
        if det != 1.0:
            s = math.sqrt(det)
            for name in "abcd":
                object.__setattr__(self, name, getattr(self, name) / s)

    @classmethod
    def from_rows(cls, entries: Sequence[float]) -> "Mobius":
        if len(entries) != 4:
            raise ValueError("a matrix needs 4 row-major entries")
        return cls(*map(float, entries))

    def __mul__(self, other: "Mobius") -> "Mobius":
        if not isinstance(other, Mobius):
            raise StructuralError("cannot multiply a matrix by a non-matrix")
        # a product of unimodular matrices is unimodular; re-checking det on a
        # long product would only measure rounding noise
        return _unimodular(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "Mobius":
        return _unimodular(self.d, -self.b, -self.c, self.a)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> float:
        return self.a + self.d

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def key(self, resolution: float = 1e-9) -> tuple:
        """Quantised key identifying ``M`` with ``-M`` (same isometry)."""
        entries = (self.a, self.b, self.c, self.d)
        sign = 1.0
        for v in entries:
            if abs(v) > resolution:
                sign = 1.0 if v > 0 else -1.0
                break
        scale = max(1.0, max(abs(v) for v in entries))
        # the scale itself is part of the key: diag(t, 1/t) must not collide for different t
        return (int(round(math.log(scale) / resolution)),) + tuple(
            int(round(sign * v / (resolution * scale))) for v in entries
        )


def _unimodular(a, b, c, d) -> Mobius:
    g = object.__new__(Mobius)
    for name, v in zip("abcd", (a, b, c, d)):
        object.__setattr__(g, name, v)
    return g


def _hdist(p: complex, q: complex) -> float:
    # 2 asinh(|p - q| / (2 sqrt(Im p Im q))), accurate at short range
    return 2.0 * math.asinh(abs(p - q) / (2.0 * math.sqrt(p.imag * q.imag)))


def _is_boundary(x) -> bool:
    return isinstance(x, (float, int)) and not isinstance(x, bool)


def _log_poisson(z: complex, xi: float) -> float:
    """``log(|z - xi|^2 / Im z)``, a Busemann function for ``xi``."""
    if math.isinf(xi):
        return -math.log(z.imag)
    return 2.0 * math.log(abs(z - xi)) - math.log(z.imag)


def boundary_chord(xi: float, eta: float) -> float:
    """Half the Euclidean chord between two ideal points seen from ``i``.

    This is ``exp(-(xi|eta)_i)``: after the Cayley map ``w = (z-i)/(z+i)``
    the Gromov product of two ideal points at the centre of the disc is
    ``-log(|w - w'| / 2)``.
    """
    if math.isinf(xi) and math.isinf(eta):
        return 0.0
    if math.isinf(xi):
        return 1.0 / math.sqrt(1.0 + eta * eta)
    if math.isinf(eta):
        return 1.0 / math.sqrt(1.0 + xi * xi)
    return abs(xi - eta) / math.sqrt((1.0 + xi * xi) * (1.0 + eta * eta))


def boundary_angle(xi) -> np.ndarray:
    """Angle of the Cayley image of ideal points (``inf`` maps to angle 0)."""
    x = np.asarray(xi, dtype=float)
    with np.errstate(invalid="ignore"):
        w = (x - 1j) / (x + 1j)
    ang = np.angle(w)
    return np.where(np.isinf(x), 0.0, ang)


class FuchsianHalfPlane(SpaceModel):
    """Upper half-plane model of H^2 with a finitely generated Möbius group.

    ``generators`` are the ``m`` given matrices; the full generating set is
    indexed ``1..2m`` with ``i + m`` the inverse of ``i``, matching the tree
    convention so the same words work on both backends.
    """

    kind = "fuchsian"

    def __init__(self, generators: Sequence[Mobius], delta: float | None = None,
                 visual_base: float = math.e, max_steps: int = 5000):
        gens = [g if isinstance(g, Mobius) else Mobius.from_rows(g) for g in generators]
        if not gens:
            raise ValueError("need at least one generator")
        self._gens = gens + [g.inverse() for g in gens]
        self.max_steps = int(max_steps)
        super().__init__(0.0 if delta is None else delta, visual_base)
        if delta is None:
            # empirical lower bound plus a 20% margin
            from .base import estimate_delta

            self.delta = 1.2 * estimate_delta(self, 20_000, seed=0)

    def __repr__(self):
        return f"FuchsianHalfPlane(m={self.rank}, delta={self.delta:.4f}, visual_base={self.visual_base})"

    @property
    def rank(self) -> int:
        return len(self._gens) // 2

    # group
    def identity(self) -> Mobius:
        return Mobius(1.0, 0.0, 0.0, 1.0)

    @property
    def generators(self) -> list[Mobius]:
        return list(self._gens)

    def parse_element(self, spec) -> Mobius:
        """A word over the generator indices (or letters), or 4 raw entries."""
        from .tree import parse_letters

        if not isinstance(spec, str) and len(spec) == 4 and any(isinstance(v, float) for v in spec):
            return Mobius.from_rows(spec)
        g = self.identity()
        for i in parse_letters(spec, self.rank):
            g = g * self._gens[i - 1]
        return g

    def multiply(self, g: Mobius, h: Mobius) -> Mobius:
        self._require(g, Mobius)
        self._require(h, Mobius)
        return g * h

    def inverse(self, g: Mobius) -> Mobius:
        self._require(g, Mobius)
        return g.inverse()

    def element_key(self, g: Mobius) -> tuple:
        return g.key()

    # space
    @property
    def basepoint(self) -> complex:
        return 1j

    def act(self, g: Mobius, p: complex) -> complex:
        self._require(g, Mobius)
        self._require(p, complex, "point")
        # det g = 1 gives Im w = Im p / |cp + d|^2 without the cancelling ad - bc
        den = g.c * p + g.d
        q = den.real * den.real + den.imag * den.imag
        w = complex(((g.a * p + g.b) * den.conjugate()).real / q, p.imag / q) if q > 0 else complex("nan")
        if not w.imag > IM_FLOOR or not cmath.isfinite(w):
            raise PrecisionError(f"image point {w!r} is beyond double precision")
        return w

    def act_boundary(self, g: Mobius, xi: float) -> float:
        self._require(g, Mobius)
        if math.isinf(xi):
            return math.inf if g.c == 0 else g.a / g.c
        den = g.c * xi + g.d
        if den == 0:
            return math.inf
        return (g.a * xi + g.b) / den

    def distance(self, p: complex, q: complex) -> float:
        self._require(p, complex, "point")
        self._require(q, complex, "point")
        if p == q:
            return 0.0
        return _hdist(p, q)

    def norm(self, g: Mobius) -> float:
        """``d(i, g i) = arccosh(|g|_F^2 / 2)``, without forming ``g i``."""
        s = 0.5 * (g.a * g.a + g.b * g.b + g.c * g.c + g.d * g.d)
        return math.acosh(max(s, 1.0))

    def _to_i(self, base, p):
        # isometry z -> (z - Re b) / Im b sends base to i
        if base is None or base == 1j:
            return p
        if _is_boundary(p):
            return p if math.isinf(p) else (p - base.real) / base.imag
        return complex((p.real - base.real) / base.imag, p.imag / base.imag)

    def gromov_product(self, p, q, base=None) -> float:
        """Gromov product at ``base`` (default ``i``).

        Ideal arguments use closed forms that are the limits of the finite
        formula along geodesic rays: ``(x|xi) = (d(o,x) + B_xi(x,o)) / 2`` and
        ``(xi|eta) = -log boundary_chord(xi, eta)``.
        """
        if base is not None:
            self._require(base, complex, "base")
        p, q = self._to_i(base, p), self._to_i(base, q)
        p_bd, q_bd = _is_boundary(p), _is_boundary(q)
        o = 1j
        if not p_bd and not q_bd:
            return 0.5 * (self.distance(o, p) + self.distance(o, q) - self.distance(p, q))
        if p_bd and q_bd:
            if p == q:
                return math.inf
            chord = boundary_chord(float(p), float(q))
            if chord <= 0.0:
                raise InsufficientResolution(f"ideal points {p!r} and {q!r} are not separable in double precision")
            return -math.log(chord)
        x, xi = (q, p) if p_bd else (p, q)
        self._require(x, complex, "point")
        return 0.5 * (self.distance(o, x) + self.busemann(float(xi), x, o))

    def busemann(self, xi: float, x: complex, y: complex) -> float:
        """``B_xi(x, y) = f(y) - f(x)`` with ``f(z) = log(|z - xi|^2 / Im z)``.

        For ``xi = inf`` this is the horocyclic ``log Im x - log Im y``.
        """
        if not _is_boundary(xi):
            raise StructuralError("Busemann cocycle needs an ideal point")
        self._require(x, complex, "point")
        self._require(y, complex, "point")
        return _log_poisson(y, float(xi)) - _log_poisson(x, float(xi))

    def classify_hyperbolic(self, g: Mobius) -> Classification:
        self._require(g, Mobius)
        tr = abs(g.trace)
        if tr <= 2.0 + 1e-12:
            return Classification("parabolic" if abs(tr - 2.0) <= 1e-12 else "elliptic")
        a, b, c, d = g.a, g.b, g.c, g.d
        if c == 0:
            other = b / (d - a) + 0.0
            fixed = [math.inf, other]
        else:
            disc = math.sqrt((a - d) ** 2 + 4 * b * c)
            fixed = [((a - d) + disc) / (2 * c) + 0.0, ((a - d) - disc) / (2 * c) + 0.0]

        def multiplier(x):
            # |derivative| at the fixed point; < 1 means attracting
            if math.isinf(x):
                return (d / a) ** 2
            return 1.0 / (c * x + d) ** 2

        fixed.sort(key=multiplier)
        return Classification("hyperbolic", fixed[0], fixed[1])

    def distance_to_axis(self, g: Mobius, p: complex | None = None) -> float:
        """Distance from ``p`` (default ``i``) to the axis of a hyperbolic ``g``."""
        cls = self.classify_hyperbolic(g)
        if not cls.is_hyperbolic:
            raise ValueError("only hyperbolic elements have an axis")
        p = 1j if p is None else p
        u, v = cls.attracting, cls.repelling
        if math.isinf(v):
            u, v = v, u
        # send v -> 0 and u -> inf; the axis becomes the imaginary axis
        w = p - v if math.isinf(u) else (p - v) / (p - u)
        return math.asinh(abs(w.real) / abs(w.imag))

    def random_points(self, rng, count, radius):
        s = rng.uniform(0.0, radius, size=count)
        theta = rng.uniform(0.0, 2 * math.pi, size=count)
        w = np.tanh(s / 2) * np.exp(1j * theta)
        z = 1j * (1 + w) / (1 - w)
        return [complex(v) for v in z]

    def gromov_product_array(self, xs, ys, base):
        x = np.asarray(xs, dtype=complex)
        y = np.asarray(ys, dtype=complex)
        o = np.asarray(base, dtype=complex)

        def dist(p, q):
            return 2.0 * np.arcsinh(np.abs(p - q) / (2.0 * np.sqrt(p.imag * q.imag)))

        return 0.5 * (dist(o, x) + dist(o, y) - dist(x, y))


def schottky_pair(trace: float = 4.0) -> list[Mobius]:
    """Two hyperbolic generators with perpendicular axes through ``i``.

    One fixes ``+-1``, the other ``0`` and ``inf``. For trace above
    ``2 * sqrt(2)`` (translation length above ``2 asinh(1)``) the isometric
    circles are pairwise disjoint, so the group is a free Schottky group.
    """
    if trace <= 2.0 * math.sqrt(2.0):
        raise ValueError("trace must exceed 2*sqrt(2) for a Schottky pair")
    ch = trace / 2.0
    sh = math.sqrt(ch * ch - 1.0)
    lam = ch + sh
    return [Mobius(ch, sh, sh, ch), Mobius(lam, 0.0, 0.0, 1.0 / lam)]
