import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapekrrc import kernels, shape
from shapekrrc.errors import EmptyInput, InvalidInput
from shapekrrc.kernels import KernelFamily, KernelSpec, gram, kernel_eval

from .conftest import orthogonal_pair_k3, preshape_pairs

FAMILIES = list(KernelFamily)


def test_spec_validation():
    with pytest.raises(InvalidInput):
        KernelSpec("vwg", 0)
    with pytest.raises(InvalidInput):
        KernelSpec("vwg", -1)
    with pytest.raises(InvalidInput):
        KernelSpec("polynomial", 1)
    assert KernelSpec("intrinsic", 1).family is KernelFamily.INTRINSIC
    assert KernelSpec.from_dict(KernelSpec("fpg", 0.5).to_dict()) == KernelSpec("fpg", 0.5)


@pytest.mark.parametrize("family", FAMILIES)
def test_kernel_of_identical_shapes_is_one(rng, family):
    u = shape.random_preshape(5, rng)
    assert kernel_eval(KernelSpec(family, 0.3), u, u) == 1.0


def test_vwg_orthogonal_value():
    a, b = orthogonal_pair_k3()
    assert kernel_eval(KernelSpec("vwg", 2.0), a, b) == pytest.approx(np.exp(-1), abs=1e-15)


def test_vwg_fpg_bandwidth_correspondence(rng):
    X = shape.random_preshape_rows(1000, 6, rng)
    Y = shape.random_preshape_rows(1000, 6, rng)
    s2 = rng.uniform(0.05, 5, size=1000)
    for a, b, s in zip(X, Y, s2):
        assert abs(kernel_eval(KernelSpec("vwg", s), a, b) - kernel_eval(KernelSpec("fpg", s / 2), a, b)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(preshape_pairs(), st.sampled_from(FAMILIES), st.floats(1e-2, 1e2), st.floats(1.01, 10))
def test_kernel_range_and_bandwidth_monotone(pair, family, s2, factor):
    a, b = pair
    lo = kernel_eval(KernelSpec(family, s2), a, b)
    hi = kernel_eval(KernelSpec(family, s2 * factor), a, b)
    assert 0 <= lo <= 1
    if lo < 1 - 1e-9 and lo > 1e-300:
        assert hi > lo


def test_gram_single_shape(rng):
    g = gram(KernelSpec("vwg", 1.0), [shape.random_preshape(4, rng)])
    np.testing.assert_array_equal(g.values, [[1.0]])


def test_gram_two_orthogonal():
    a, b = orthogonal_pair_k3()
    g = gram(KernelSpec("vwg", 2.0), [a, b])
    e = np.exp(-1)
    np.testing.assert_allclose(g.values, [[1, e], [e, 1]], atol=1e-15)


def test_gram_empty():
    with pytest.raises(EmptyInput):
        gram(KernelSpec("vwg", 1.0), [])


@pytest.mark.parametrize("family", FAMILIES)
def test_gram_matches_double_loop(rng, family):
    X = [shape.random_preshape(5, rng) for _ in range(10)]
    spec = KernelSpec(family, 0.7)
    g = gram(spec, X).values
    oracle = np.array([[kernel_eval(spec, a, b) for b in X] for a in X])
    np.testing.assert_allclose(g, oracle, atol=1e-12)
    assert np.array_equal(g, g.T)
    assert np.all(np.diag(g) == 1.0)


def test_cross_gram_matches_loop(rng):
    A = shape.random_preshape_rows(4, 5, rng)
    B = shape.random_preshape_rows(3, 5, rng)
    spec = KernelSpec("rie", 0.4)
    oracle = np.array([[kernel_eval(spec, a, b) for b in B] for a in A])
    np.testing.assert_allclose(kernels.cross_gram(spec, A, B), oracle, atol=1e-12)


def test_min_eigenvalue_near_identity():
    # mutually orthogonal preshapes in k=4 (the centered subspace has dim 3)
    basis = np.array([[1, -1, 0, 0], [1, 1, -2, 0], [1, 1, 1, -3]], dtype=complex)
    X = basis / np.linalg.norm(basis, axis=1, keepdims=True)
    g = gram(KernelSpec("vwg", 0.05), X)
    assert kernels.min_eigenvalue(g) == pytest.approx(1.0, abs=1e-15)


def test_vwg_gram_psd_50_shapes(rng):
    X = shape.random_preshape_rows(50, 6, rng)
    for s2 in (0.01, 0.1, 1, 10, 100):
        assert kernels.min_eigenvalue(gram(KernelSpec("vwg", s2), X)) >= -1e-8


@pytest.mark.parametrize("family", [KernelFamily.VWG, KernelFamily.FPG, KernelFamily.EUCLIDEAN])
def test_psd_families_over_random_sets(rng, family):
    for _ in range(100):
        n = int(rng.integers(2, 51))
        k = int(rng.integers(3, 8))
        s2 = 10 ** rng.uniform(-2, 2)
        X = shape.random_preshape_rows(n, k, rng)
        assert kernels.min_eigenvalue(gram(KernelSpec(family, s2), X)) >= -1e-8


def test_negative_type_zero_coefficients(rng):
    X = shape.random_preshape_rows(5, 4, rng)
    assert kernels.check_negative_type("vwg", X, alphas=np.zeros((3, 5))) == 0


def test_negative_type_needs_two_shapes(rng):
    with pytest.raises(InvalidInput):
        kernels.check_negative_type("vwg", shape.random_preshape_rows(1, 4, rng), 10)


def test_negative_type_matches_proof_identity(rng):
    """sum a_i a_j rho_E^2 = -2 || sum a_i J(u_i) ||_F^2 for zero-sum a."""
    X = shape.random_preshape_rows(20, 5, rng)
    for _ in range(50):
        a = rng.standard_normal(20)
        a -= a.mean()
        form = kernels.check_negative_type(shape.extrinsic_dist_sq, list(X), alphas=a[None, :])
        S = sum(ai * shape.vw_embed(u).matrix for ai, u in zip(a, X))
        assert form == pytest.approx(-2 * np.sum(np.abs(S) ** 2), rel=1e-9, abs=1e-12)


def test_extrinsic_is_negative_type(rng):
    X = shape.random_preshape_rows(20, 5, rng)
    assert kernels.check_negative_type("vwg", X, 1000, rng) <= 1e-8


def test_riemannian_not_negative_type(rng):
    # randomized counterexample search; positive value certifies the violation
    witness = None
    for _ in range(200):
        X = shape.random_preshape_rows(int(rng.integers(3, 20)), 3, rng)
        v = kernels.check_negative_type("rie", X, 200, rng)
        if v > 0:
            witness = (X, v)
            break
    assert witness is not None
    assert witness[1] > 1e-6


def test_callable_and_named_distance_agree(rng):
    X = shape.random_preshape_rows(8, 4, rng)
    a = np.random.default_rng(1).standard_normal((5, 8))
    a -= a.mean(axis=1, keepdims=True)
    by_name = kernels.check_negative_type("riemannian", X, alphas=a)
    by_func = kernels.check_negative_type(lambda p, q: shape.riemannian_dist(p, q) ** 2, list(X), alphas=a)
    assert by_name == pytest.approx(by_func, abs=1e-12)


def test_find_psd_violation_vwg_none(rng):
    pool = shape.random_preshape_rows(200, 5, rng)
    assert kernels.find_psd_violation("vwg", pool, [0.01, 0.1, 1, 10, 100], 10, 10_000, rng) is None


def test_find_psd_violation_intrinsic_witness(rng):
    pool = shape.random_preshape_rows(200, 4, rng)
    w = kernels.find_psd_violation("rie", pool, [0.3, 1, 3, 10, 100], 20, 2000, rng)
    assert w is not None
    assert w.min_eigenvalue < -1e-6
    g = np.exp(-kernels.gram_dist_sq("rie", pool[w.indices]) / w.sigma_sq)
    assert kernels.min_eigenvalue(g) == pytest.approx(w.min_eigenvalue, abs=1e-12)


def test_find_psd_violation_subset_one(rng):
    pool = shape.random_preshape_rows(5, 4, rng)
    assert kernels.find_psd_violation("rie", pool, [1.0], 1, 100, rng) is None


def test_find_psd_violation_pool_too_small(rng):
    pool = shape.random_preshape_rows(5, 4, rng)
    with pytest.raises(InvalidInput):
        kernels.find_psd_violation("rie", pool, [1.0], 5, 10, rng)
