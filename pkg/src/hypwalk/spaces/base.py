"""Backend-independent pieces of the geometry layer."""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import StructuralError


@dataclass(frozen=True)
class Classification:
    """Outcome of :meth:`SpaceModel.classify_hyperbolic`.

    ``attracting`` and ``repelling`` are boundary points, set only when
    ``kind == "hyperbolic"``.
    """

    kind: str
    attracting: Any = None
    repelling: Any = None

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind == "hyperbolic"


class SpaceModel(abc.ABC):
    """A proper geodesic hyperbolic space with a group acting on it.

    Concrete backends fix how group elements, points and boundary points
    are represented; everything downstream talks to them through this
    interface.
    """

    kind: str = ""

    def __init__(self, delta: float, visual_base: float = math.e):
        if not delta >= 0:
            raise ValueError(f"hyperbolicity constant must be >= 0, got {delta}")
        if not visual_base > 1:
            raise ValueError(f"visual base must be > 1, got {visual_base}")
        self.delta = float(delta)
        self.visual_base = float(visual_base)

    # group side
    @abc.abstractmethod
    def identity(self): ...

    @property
    @abc.abstractmethod
    def generators(self) -> list: ...

    @abc.abstractmethod
    def multiply(self, g, h): ...

    @abc.abstractmethod
    def inverse(self, g): ...

    def power(self, g, n: int):
        if n < 0:
            return self.power(self.inverse(g), -n)
        result, base = self.identity(), g
        while n:
            if n & 1:
                result = self.multiply(result, base)
            base = self.multiply(base, base)
            n >>= 1
        return result

    @abc.abstractmethod
    def element_key(self, g) -> tuple: ...

    @abc.abstractmethod
    def parse_element(self, spec): ...

    # space side
    @property
    @abc.abstractmethod
    def basepoint(self): ...

    @abc.abstractmethod
    def act(self, g, p): ...

    @abc.abstractmethod
    def act_boundary(self, g, xi): ...

    @abc.abstractmethod
    def distance(self, p, q) -> float: ...

    def norm(self, g) -> float:
        """``d(o, g o)``."""
        return self.distance(self.basepoint, self.act(g, self.basepoint))

    @abc.abstractmethod
    def gromov_product(self, p, q, base=None) -> float: ...

    def visual_quasimetric(self, xi, eta) -> float:
        """``a ** -(xi|eta)``; zero for identical descriptions."""
        if xi == eta:
            return 0.0
        gp = self.gromov_product(xi, eta)
        if math.isinf(gp):
            return 0.0
        return self.visual_base ** (-gp)

    @abc.abstractmethod
    def busemann(self, xi, x, y) -> float: ...

    @abc.abstractmethod
    def classify_hyperbolic(self, g) -> Classification: ...

    # sampling helpers used by delta estimation and property tests
    @abc.abstractmethod
    def random_points(self, rng: np.random.Generator, count: int, radius: float) -> list: ...

    def gromov_product_array(self, xs, ys, base) -> np.ndarray:
        return np.array([self.gromov_product(x, y, b) for x, y, b in zip(xs, ys, base)], dtype=float)

    def _require(self, value, kinds, what="operand"):
        if not isinstance(value, kinds):
            raise StructuralError(
                f"{what} of type {type(value).__name__} does not belong to the {self.kind} backend"
            )


def estimate_delta(model: SpaceModel, quadruple_count: int, seed: int, radius: float = 8.0) -> float:
    """Largest four-point defect ``min{(x|y),(y|z)} - (x|z)`` over random quadruples.

    All four points (including the base) are drawn from a ball of the given
    radius around the basepoint. Each quadruple is scored with all three
    choices of middle point. The result never exceeds the true constant.
    """
    if quadruple_count < 1:
        raise ValueError("quadruple_count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xDE17A,)))
    x, y, z, o = (model.random_points(rng, quadruple_count, radius) for _ in range(4))
    return float(max(0.0, four_point_defect(model, x, y, z, o).max()))


def four_point_defect(model: SpaceModel, x, y, z, o) -> np.ndarray:
    """Per-quadruple defect, maximised over the three choices of middle point."""
    xy = model.gromov_product_array(x, y, o)
    yz = model.gromov_product_array(y, z, o)
    xz = model.gromov_product_array(x, z, o)
    return np.maximum.reduce([
        np.minimum(xy, yz) - xz,
        np.minimum(xy, xz) - yz,
        np.minimum(xz, yz) - xy,
    ])
