"""Concrete hyperbolic geometries behind one interface."""

from .base import Classification, SpaceModel, estimate_delta, four_point_defect
from .halfplane import FuchsianHalfPlane, Mobius, boundary_angle, boundary_chord, schottky_pair
from .tree import FreeGroupTree, TreeBoundaryPoint, Word

import numpy as np


def quasi_geodesic_fit(model: SpaceModel, g, n_max: int = 50):
    """Affine fit of ``n -> d(o, g^n o)`` for ``n = 0..n_max``.

    Returns ``(slope, intercept, max_abs_residual)``; for a hyperbolic
    element the slope is its stable translation length and the residual
    stays bounded, which realises the quasi-geodesic constants empirically.
    """
    ns = np.arange(n_max + 1)
    h = model.identity()
    dists = []
    for _ in ns:
        dists.append(float(model.norm(h)))
        h = model.multiply(h, g)
    dists = np.array(dists)
    slope, intercept = np.polyfit(ns, dists, 1)
    resid = np.abs(dists - (slope * ns + intercept)).max()
    return float(slope), float(intercept), float(resid)


__all__ = [
    "Classification", "SpaceModel", "estimate_delta", "four_point_defect",
    "FuchsianHalfPlane", "Mobius", "boundary_angle", "boundary_chord", "schottky_pair",
    "FreeGroupTree", "TreeBoundaryPoint", "Word", "quasi_geodesic_fit",
]
