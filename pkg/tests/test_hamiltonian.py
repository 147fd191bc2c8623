import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import reference as ref
from qmke.algebra import HermitianOp, purity, trace_norm
from qmke.errors import DegeneratePriorError, DomainError
from qmke.hamiltonian import estimate_hamiltonian, evolve, hamiltonian_distance

coord = st.floats(-2, 2, allow_nan=False)
vec3 = st.tuples(coord, coord, coord).map(np.array)


def test_evolve_identity():
    t = np.array([0.2, -0.3, 0.4])
    np.testing.assert_array_equal(evolve(t, [0, 0, 0]), t)


def test_evolve_quarter_turn_about_x():
    # frozen from dense unitary conjugation
    np.testing.assert_allclose(ref.evolve([0, 0, 0.5], [math.pi / 4, 0, 0]), [0, -0.5, 0], atol=1e-15)
    np.testing.assert_allclose(evolve([0, 0, 0.5], [math.pi / 4, 0, 0]), [0, -0.5, 0], atol=1e-15)


@given(vec3)
def test_evolve_maximally_mixed_invariant(h):
    np.testing.assert_array_equal(evolve([0, 0, 0], h), 0)


def test_evolve_matches_unitary_conjugation():
    rng = np.random.default_rng(21)
    for _ in range(300):
        t = ref.random_bloch(rng)
        h = rng.normal(size=3)
        out = evolve(t, h)
        np.testing.assert_allclose(out, ref.evolve(t, h), atol=1e-12)
        assert abs(purity(out) - purity(t)) <= 1e-13


def test_estimate_examples():
    t = np.array([0.1, 0.7, -0.2])
    np.testing.assert_array_equal(estimate_hamiltonian(t, t), 0)
    # frozen from numpy.cross arithmetic
    np.testing.assert_allclose(estimate_hamiltonian([0, 0, 0.5], [0.1, 0, 0.5]), [0, 0.1, 0], atol=1e-15)


def test_estimate_degenerate_prior():
    with pytest.raises(DegeneratePriorError):
        estimate_hamiltonian([0, 0, 0], [0.1, 0, 0])
    with pytest.raises(DegeneratePriorError):
        estimate_hamiltonian([1e-13, 0, 0], [0.1, 0, 0])


def test_estimate_is_orthogonal_to_prior():
    rng = np.random.default_rng(22)
    for _ in range(300):
        t, r = ref.random_bloch(rng, 1.0, 0.05), ref.random_bloch(rng)
        assert abs(estimate_hamiltonian(t, r) @ t) <= 1e-14


def finite_difference_estimate(t, h, eps=1e-7):
    """Directional derivative of the true evolution, inverted to first order."""
    d = (ref.evolve(t, eps * h) - ref.evolve(t, -eps * h)) / (2 * eps)
    return np.cross(t, d) / (2 * (t @ t))


@pytest.mark.parametrize("seed", range(5))
def test_first_order_recovery(seed):
    rng = np.random.default_rng(seed)
    t = ref.random_bloch(rng, 0.95, 0.3)
    h = ref.random_bloch(rng, 1.0, 1.0) * 1e-3
    perp = h - (h @ t) * t / (t @ t)
    np.testing.assert_allclose(finite_difference_estimate(t, h / 1e-3) * 1e-3, perp, atol=1e-9)
    est = estimate_hamiltonian(t, evolve(t, h))
    assert np.linalg.norm(est - perp) <= 1e-2 * np.linalg.norm(perp)


def test_perpendicular_h_recovered_with_quadratic_error():
    t = np.array([0.0, 0.0, 0.6])
    errs = []
    for size in (1e-2, 1e-3):
        h = np.array([size, 0.0, 0.0])
        errs.append(np.linalg.norm(estimate_hamiltonian(t, evolve(t, h)) - h))
    assert errs[1] < errs[0] / 50


@pytest.mark.parametrize("h1, h2, expected", [
    ([0.2, 0.2, 0.2], [0.2, 0.2, 0.2], 0.0),
    ([0, 0.1, 0], [0, 0, 0], 0.1),
    ([0.3, 0, 0], [0, 0.4, 0], 0.5),
])
def test_distance_examples(h1, h2, expected):
    assert hamiltonian_distance(h1, h2) == pytest.approx(expected, abs=1e-15)
    diff = HermitianOp(0.0, np.subtract(h1, h2))
    assert 0.5 * trace_norm(diff) == pytest.approx(expected, abs=1e-15)
    assert 0.5 * ref.trace_norm(diff.matrix()) == pytest.approx(expected, abs=1e-14)


@given(vec3, vec3, vec3)
def test_distance_metric_axioms(a, b, c):
    dab = hamiltonian_distance(a, b)
    assert dab == hamiltonian_distance(b, a)
    assert dab >= 0
    assert hamiltonian_distance(a, a) == 0
    assert dab <= hamiltonian_distance(a, c) + hamiltonian_distance(c, b) + 1e-12


def test_distance_rejects_bad_vectors():
    with pytest.raises(DomainError):
        hamiltonian_distance([0, 0], [0, 0, 0])
    with pytest.raises(DomainError):
        evolve([0, 0, 0.5], [np.inf, 0, 0])
