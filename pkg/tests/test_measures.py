import itertools
import math
from collections import defaultdict

import pytest

from hypwalk.errors import CollisionError, StructuralError
from hypwalk.measures import (
    FiniteMeasure,
    MuKFamily,
    _MatrixBuckets,
    convolve,
    entropy,
    first_moment,
    generates_ball,
    iter_convolution_powers,
    lazy,
    mu_k_entropy_bound,
    point_mass,
    simple_random_walk,
    uniform,
)
from hypwalk.spaces import Mobius

from .test_tree import naive_reduce


def brute_force_law(m, n):
    """Law of mu^n by enumerating every n-step path."""
    law = defaultdict(float)
    steps = list(m)
    for path in itertools.product(steps, repeat=n):
        word = naive_reduce(sum((g.letters for g, _ in path), ()))
        law[word] += math.prod(p for _, p in path)
    return law


def test_validation(tree):
    a = tree.word("a")
    with pytest.raises(ValueError):
        FiniteMeasure((a,), (0.5,))
    with pytest.raises(ValueError):
        FiniteMeasure((a, a), (0.5, 0.5))
    with pytest.raises(ValueError):
        FiniteMeasure((a, tree.word("b")), (1.0, 0.0))
    m = FiniteMeasure.from_pairs([(a, 1.0), (tree.word("aAa"), 1.0)], normalize=True)
    assert len(m) == 1 and m.mass == (1.0,)


def test_simple_and_lazy(tree):
    m = simple_random_walk(tree)
    assert len(m) == 4 and m.symmetric
    assert entropy(m) == pytest.approx(math.log(4))
    lz = lazy(m, tree, 0.5)
    assert lz.mass_of(tree.identity()) == 0.5
    assert first_moment(lz, tree) == pytest.approx(0.5)
    assert not FiniteMeasure.from_pairs([(tree.word("a"), 0.7), (tree.word("A"), 0.3)]).symmetric


@pytest.mark.parametrize("n", [2, 3, 5])
def test_convolution_powers_match_enumeration(tree, n):
    m = FiniteMeasure.from_pairs(zip(tree.generators, [0.4, 0.25, 0.1, 0.25]))
    ref = brute_force_law(m, n)
    for k, masses, _ in iter_convolution_powers(m, n):
        pass
    assert k == n
    assert set(masses) == set(ref)
    for w, p in ref.items():
        assert masses[w] == pytest.approx(p, abs=1e-15)


def test_convolve_two_measures(tree):
    m = simple_random_walk(tree)
    two = convolve(m, m)
    assert two.mass_of(tree.identity()) == pytest.approx(0.25)
    assert len(two) == 13


def test_matrix_convolution_sees_a_free_group(tree, schottky):
    # the Schottky group is free, so mu^n has the same law as on the tree
    for (n, t_masses, _), (_, h_masses, _) in zip(
        iter_convolution_powers(simple_random_walk(tree), 4),
        iter_convolution_powers(simple_random_walk(schottky), 4),
    ):
        assert len(t_masses) == len(h_masses)
        h_t = -sum(p * math.log(p) for p in t_masses.values())
        h_h = -sum(p * math.log(p) for p in h_masses.values())
        assert h_t == pytest.approx(h_h, abs=1e-12)


def test_convolve_rejects_mixed_backends(tree, schottky):
    with pytest.raises(StructuralError):
        convolve(simple_random_walk(tree), simple_random_walk(schottky))


def test_collision_is_refused():
    b = _MatrixBuckets()
    b.key(Mobius(1.0, 0.0, 0.0, 1.0))
    with pytest.raises(CollisionError):
        b.key(Mobius(1.0, 3e-10, 0.0, 1.0))


def test_mu_k_family(tree):
    fam = MuKFamily(simple_random_walk(tree), tree.word("a"), tree)
    m3 = fam.measure(3)
    assert m3.mass_of(tree.word("aaa")) == 0.25
    assert m3.mass_of(tree.word("AAA")) == 0.25
    assert m3.mass_of(tree.word("b")) == 0.125
    m0 = fam.measure(0)
    assert m0.mass_of(tree.identity()) == 0.5
    m1 = fam.measure(1)
    assert m1.mass_of(tree.word("a")) == pytest.approx(0.125 + 0.25)
    with pytest.raises(ValueError):
        fam.measure(-1)


def test_mu_k_entropy_bounded_for_all_k(tree):
    base = simple_random_walk(tree)
    fam = MuKFamily(base, tree.word("ab"), tree)
    cap = mu_k_entropy_bound(base)
    assert cap == pytest.approx(1.5 * math.log(2) + 0.5 * math.log(4))
    for k in range(0, 40):
        assert entropy(fam.measure(k)) <= cap + 1e-12


def test_mu_k_needs_hyperbolic_and_generation(tree):
    with pytest.raises(ValueError):
        MuKFamily(simple_random_walk(tree), tree.identity(), tree)
    with pytest.raises(ValueError):
        MuKFamily(uniform([tree.word("a"), tree.word("A")]), tree.word("a"), tree)


def test_generates_ball(tree, schottky):
    assert generates_ball(simple_random_walk(tree), tree)
    assert generates_ball(simple_random_walk(schottky), schottky)
    assert not generates_ball(point_mass(tree.word("a")), tree)
