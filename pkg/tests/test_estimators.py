import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypwalk.errors import EstimatorFailure, InsufficientResolution
from hypwalk.estimators import (
    BoundarySet,
    EstimateCI,
    ball_counts,
    clopper_pearson,
    convexity_check,
    correlation_dimension,
    dim_bound_check,
    entropy_growth_check,
    escape_rate_busemann,
    escape_rate_exact_tree,
    escape_rate_mc,
    gromov_bound_check,
    gromov_product_outside,
    open_set_mass,
    pointwise_dimension,
)
from hypwalk.estimators.dimension import fit_windows
from hypwalk.estimators.empirical import as_measure
from hypwalk.estimators.stats import bootstrap_se, linear_fit, mann_kendall, slope_trend_p
from hypwalk.measures import FiniteMeasure, MuKFamily, simple_random_walk
from hypwalk.spaces import FreeGroupTree, TreeBoundaryPoint, boundary_chord
from hypwalk.spaces.tree import common_prefix
from hypwalk.walker import BoundaryArrays, BoundarySample, WalkConfig, sample_boundary_arrays

T = FreeGroupTree(2)


def uniform_tree_samples(n, depth, seed):
    """Samples of the uniform (Patterson-Sullivan) measure on the rank-2 boundary."""
    rng = np.random.default_rng(seed)
    pre = np.zeros((n, depth), dtype=np.int16)
    pre[:, 0] = rng.integers(1, 5, n)
    for j in range(1, depth):
        inv = (pre[:, j - 1] + 1) % 4 + 1  # 1<->3, 2<->4
        r = rng.integers(1, 4, n)  # one of the three letters other than inv
        pre[:, j] = (inv - 1 + r) % 4 + 1
    arr = BoundaryArrays("tree", 0, 0, prefixes=pre, depths=np.full(n, depth), rank=2,
                         resolution=np.full(n, float(depth)))
    return as_measure(arr)


def tree_points(nu):
    return [TreeBoundaryPoint(tuple(int(c) for c in row[:d]), 2) for row, d in zip(nu.data.prefixes, nu.data.depths)]


# statistics helpers

def test_bootstrap_se_matches_gaussian_error():
    x = np.random.default_rng(0).normal(0, 2.0, 5000)
    assert bootstrap_se(x, seed=1) == pytest.approx(2.0 / math.sqrt(5000), rel=0.15)
    assert bootstrap_se(x, seed=1) == bootstrap_se(x, seed=1)
    assert bootstrap_se(np.ones(10), seed=1) == 0.0


def test_clopper_pearson_closed_form_at_zero():
    ci = clopper_pearson(0, 10, level=0.99)
    assert ci.lo == 0.0
    assert ci.hi == pytest.approx(1 - 0.005 ** (1 / 10))
    ci = clopper_pearson(50, 100)
    assert ci.lo < 0.5 < ci.hi


def test_fits_and_trends():
    assert linear_fit([0, 1, 2], [1, 3, 5]) == pytest.approx((2.0, 1.0, 1.0))
    assert linear_fit([0, 1, 2], [4, 4, 4])[2] == 1.0
    tau, p = mann_kendall([1, 2, 3, 5, 8, 9, 12])
    assert tau == pytest.approx(1.0) and p < 0.01
    assert mann_kendall([3, 3, 3]) == (0.0, 1.0)
    assert slope_trend_p([0, 1, 2, 3], [2, 2, 2, 2]) == (0.0, 1.0)


def test_estimate_rejects_negative_error():
    with pytest.raises(ValueError):
        EstimateCI(1.0, -0.1, 1, "x", 0)


# empirical geometry against the backends

def test_tree_geometry_matches_backend():
    nu = uniform_tree_samples(200, 8, 4)
    pts = tree_points(nu)
    for g in (T.word("ab"), T.word("BaBB"), T.word("abababababab")):
        gp, bad = nu.gromov_with(g)
        be, bad2 = nu.busemann_from_origin(g)
        for i, xi in enumerate(pts):
            if bad[i]:
                with pytest.raises(InsufficientResolution):
                    T.gromov_product(g, xi)
                continue
            assert gp[i] == T.gromov_product(g, xi)
            assert be[i] == T.busemann(xi, T.identity(), g)


def test_halfplane_geometry_matches_backend(schottky):
    xs = [0.0, 0.3, -4.0, 17.5, math.inf]
    nu = as_measure([BoundarySample(x, 0, 1e-12) for x in xs])
    g = schottky.generators[0] * schottky.generators[3]
    gp, _ = nu.gromov_with(g)
    be, _ = nu.busemann_from_origin(g)
    z = schottky.act(g, 1j)
    for i, x in enumerate(xs):
        assert gp[i] == pytest.approx(schottky.gromov_product(z, x), abs=1e-9)
        assert be[i] == pytest.approx(schottky.busemann(x, 1j, z), abs=1e-9)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.floats(-5, 5), st.floats(1e-3, 0.9))
@settings(max_examples=60)
def test_ball_membership_matches_quasimetric(xs, center, radius):
    nu = as_measure([BoundarySample(x, 0, 1e-12) for x in xs])
    inside, _ = nu.membership(BoundarySet.visual_balls([center], radius))
    for x, flag in zip(xs, inside):
        chord = boundary_chord(x, center)
        if abs(chord - radius) > 1e-9:
            assert flag == (chord <= radius)


def test_cylinder_membership_and_unresolved():
    nu = as_measure([BoundarySample(TreeBoundaryPoint(p, 2), 0, 1.0) for p in [(1, 2, 2), (1,), (2, 1)]])
    inside, und = nu.membership(BoundarySet.cylinder("ab"))
    assert inside.tolist() == [True, False, False]
    assert und.tolist() == [False, True, False]
    assert BoundarySet.cylinder("ab").contains(TreeBoundaryPoint((1, 2, 1), 2))
    with pytest.raises(InsufficientResolution):
        BoundarySet.cylinder("ab").contains(TreeBoundaryPoint((1,), 2))


# escape rate

def test_mc_escape_rate_agrees_with_exact_mean(tree):
    m = simple_random_walk(tree)
    cfg = WalkConfig(steps=400, trajectories=800, seed=9)
    est = escape_rate_mc(m, tree, cfg)
    exact = escape_rate_exact_tree(m, tree, 400).values[-1]
    assert abs(est.value - exact) < 4 * est.std_error
    burn = escape_rate_mc(m, tree, cfg, burn_in=100)
    assert burn.details["burn_in"] == 100
    assert abs(burn.value - 0.5) < 4 * burn.std_error + 0.01


def test_busemann_rate_is_exact_for_srw(tree):
    # sum over generators of beta(o, g^-1 o) is 3*1 - 1 = 2 for every end, so l = 1/2 per sample
    nu = uniform_tree_samples(100, 6, 1)
    est = escape_rate_busemann(simple_random_walk(tree), tree, nu)
    assert est.value == 0.5 and est.std_error == 0.0


def test_busemann_rate_matches_mc_for_biased_walk(tree):
    m = FiniteMeasure.from_pairs(zip(tree.generators, [0.4, 0.25, 0.1, 0.25]))
    nu = sample_boundary_arrays(m, tree, WalkConfig(trajectories=20000, seed=3))
    b = escape_rate_busemann(m, tree, nu)
    mc = escape_rate_mc(m, tree, WalkConfig(steps=1000, trajectories=1000, seed=3))
    assert abs(b.value - mc.value) < 4 * math.hypot(b.std_error, mc.std_error)


def test_busemann_rate_refuses_shallow_samples(tree):
    nu = as_measure([BoundarySample(TreeBoundaryPoint((1,), 2), 0, 1.0)] * 10)
    m = FiniteMeasure.from_pairs([(tree.word("abab"), 0.5), (tree.word("BABA"), 0.5)])
    with pytest.raises(EstimatorFailure):
        escape_rate_busemann(m, tree, nu)


# dimension

def brute_force_window(x, y, ok, min_width, max_residual):
    """Widest window (ties to larger start) whose least-squares fit leaves 1 - R^2 below the cap."""
    J = len(x)
    for width in range(J, min_width - 1, -1):
        for s in range(J - width, -1, -1):
            e = s + width
            if not ok[s:e].all():
                continue
            xs, ys = x[s:e], y[s:e]
            if np.ptp(ys) == 0:
                return 0.0, s, e
            b, a = np.polyfit(xs, ys, 1)
            r = np.sum((ys - a - b * xs) ** 2) / np.sum((ys - ys.mean()) ** 2)
            if r < max_residual:
                return b, s, e
    return math.nan, -1, -1


def test_fit_windows_matches_brute_force():
    rng = np.random.default_rng(4)
    x = -np.arange(1, 13, dtype=float)
    kink = np.where(x > -7, 2 * x, 2 * -7 + 0.2 * (x + 7))
    rows = [3 * x + 1, kink, np.zeros(12), 3 * x, np.where(x > -5, 0.0, 4 * (x + 5))]
    rows += [np.cumsum(rng.normal(1, 1.5, 12)) for _ in range(20)]
    Y = np.stack(rows)
    usable = np.ones_like(Y, dtype=bool)
    usable[3, ::2] = False
    usable[7, 5] = False
    fit = fit_windows(x, Y, usable, min_width=4, max_residual=0.02)
    for i in range(len(Y)):
        b, s, e = brute_force_window(x, Y[i], usable[i], 4, 0.02)
        assert (fit.start[i], fit.stop[i]) == (s, e)
        assert fit.slope[i] == pytest.approx(b, nan_ok=True)
    assert fit.slope[0] == pytest.approx(3.0) and fit.stop[0] - fit.start[0] == 12
    assert fit.slope[2] == 0.0 and np.isnan(fit.slope[3])


def test_tree_ball_counts_match_pairwise_prefixes():
    nu = uniform_tree_samples(300, 6, 2)
    P = nu.data.prefixes
    centers = np.arange(0, 300, 7)
    counts = ball_counts(nu, [1, 2, 4, 6], centers)
    for row, c in zip(counts, centers):
        cp = np.array([common_prefix(P[c].tolist(), P[i].tolist()) for i in range(300)])
        assert row.tolist() == [int((cp >= j).sum()) for j in (1, 2, 4, 6)]


def test_halfplane_ball_counts_match_pairwise_chords():
    xs = np.random.default_rng(1).standard_cauchy(400)
    nu = as_measure([BoundarySample(float(x), 0, 1e-12) for x in xs])
    centers = np.arange(0, 400, 9)
    counts = ball_counts(nu, [1, 2, 3], centers)
    for row, c in zip(counts, centers):
        ch = np.array([boundary_chord(xs[c], x) for x in xs])
        assert row.tolist() == [int((ch <= math.exp(-j) * (1 + 1e-12)).sum()) for j in (1, 2, 3)]


def test_uniform_boundary_measure_has_dimension_log3():
    nu = uniform_tree_samples(20000, 14, 5)
    pw = pointwise_dimension(nu, seed=2)
    cd = correlation_dimension(nu, seed=2)
    assert pw.median == pytest.approx(math.log(3), rel=0.05)
    assert cd.value == pytest.approx(math.log(3), rel=0.05)
    assert pw.iqr[0] <= pw.median <= pw.iqr[1]
    assert pointwise_dimension(nu, seed=2).median == pw.median


def test_cauchy_samples_have_dimension_one():
    # the harmonic measure of i for Brownian motion is Cauchy: uniform on the circle
    xs = np.random.default_rng(3).standard_cauchy(20000)
    nu = as_measure(BoundaryArrays("halfplane", 0, 0, points=xs, resolution=np.full(len(xs), 1e-12)))
    assert correlation_dimension(nu, scales=np.arange(1, 8)).value == pytest.approx(1.0, rel=0.05)


def test_dimension_fails_without_scaling_range():
    nu = uniform_tree_samples(20000, 3, 5)
    with pytest.raises(EstimatorFailure):
        pointwise_dimension(nu)
    with pytest.raises(ValueError):
        pointwise_dimension(uniform_tree_samples(100, 3, 5))


# checks

def test_dim_bound_check_arithmetic():
    h = EstimateCI(0.5, 0.0, 1, "x", 0)
    l = EstimateCI(0.5, 0.0, 1, "x", 0)
    ok = dim_bound_check(h, l, EstimateCI(0.9, 0.01, 1, "x", 0), math.e)
    assert ok.passed and ok.bound == pytest.approx(1.0) and ok.margin == pytest.approx(0.13)
    bad = dim_bound_check(h, l, EstimateCI(1.2, 0.01, 1, "x", 0), math.e)
    assert not bad.passed and bad.margin < 0 and bad.inequality
    half = dim_bound_check(h, l, EstimateCI(0.9, 0.0, 1, "x", 0), math.e ** 2)
    assert half.bound == pytest.approx(0.5)


def test_entropy_growth_check():
    res = entropy_growth_check(EstimateCI(0.55, 0.0, 1, "x", 0), EstimateCI(0.5, 0.0, 1, "x", 0), math.log(3))
    assert res.passed == (0.55 <= 0.5 * math.log(3))


def test_mu_k_checks_on_tree(tree):
    fam = MuKFamily(simple_random_walk(tree), tree.word("a"), tree)
    nu = sample_boundary_arrays(fam.measure(4), tree, WalkConfig(trajectories=3000, seed=1))
    conv = convexity_check(fam, nu, 4)
    assert conv.passed and conv.value >= 0
    U = BoundarySet.cylinder("a", "A")
    res = gromov_bound_check(fam, U, [1, 2, 4], nu)
    assert res.passed and res.details["max_by_k"] == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        gromov_bound_check(fam, BoundarySet.cylinder("b"), [1], nu)
    assert gromov_product_outside(fam, U, TreeBoundaryPoint((2, 2, 2), 2), 5) == 0.0
    ci = open_set_mass(nu, BoundarySet.cylinder("b"))
    assert 0 < ci.lo <= ci.value <= ci.hi
