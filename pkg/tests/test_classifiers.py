import warnings

import numpy as np
import pytest

from shapekrrc import classifiers, kernels, shape
from shapekrrc.classifiers import extrinsic_mean, krrc_fit, krrc_scores, rrc_fit
from shapekrrc.errors import EmptyClass, FactorizationFailure, InvalidInput, NonUniqueMean
from shapekrrc.kernels import KernelSpec

from .conftest import orthogonal_pair_k3, separated_dataset


def _labels(*counts):
    return np.repeat(np.arange(len(counts)), counts)


def test_rrc_fit_shapes(rng):
    X = shape.random_preshape_rows(6, 4, rng)
    m = rrc_fit(X, _labels(3, 3), 0.1)
    assert [U.shape for U in m.per_class_data] == [(4, 3), (4, 3)]
    assert m.class_labels == [0, 1]


@pytest.mark.parametrize("lam", [0, -1, np.nan])
def test_rrc_rejects_bad_lambda(rng, lam):
    with pytest.raises(InvalidInput):
        rrc_fit(shape.random_preshape_rows(4, 4, rng), _labels(2, 2), lam)


def test_empty_class_rejected(rng):
    X = shape.random_preshape_rows(4, 4, rng)
    with pytest.raises(EmptyClass):
        rrc_fit(X, _labels(2, 2), 0.1, class_labels=[0, 1, 2])


def test_rrc_duplicate_columns(rng):
    u = shape.random_preshape_rows(1, 5, rng)[0]
    v = shape.random_preshape_rows(1, 5, rng)[0]
    X = np.vstack([u, u, u, v, v])
    # lambda = 0 normal equations would be singular here
    assert np.linalg.matrix_rank(np.outer(u.conj(), u)) == 1
    m = rrc_fit(X, _labels(3, 2), 1e-3)
    assert m.predict(u).label == 0
    assert m.predict(v).label == 1


def test_rrc_exact_representation(rng):
    X = shape.random_preshape_rows(8, 6, rng)
    y = _labels(4, 4)
    m = rrc_fit(X, y, 1e-10)
    for x, label in zip(X, y):
        p = m.predict(x)
        assert p.label == label
        assert p.scores[label] < 1e-12


def test_rrc_single_class(rng):
    m = rrc_fit(shape.random_preshape_rows(3, 4, rng), _labels(3), 0.5)
    for q in shape.random_preshape_rows(10, 4, rng):
        assert m.predict(q).label == 0


def test_push_through_identity(rng):
    for _ in range(100):
        k, n = int(rng.integers(3, 10)), int(rng.integers(1, 12))
        U = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
        u = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        lam = 10 ** rng.uniform(-3, 1)
        Uh = U.conj().T
        lhs = U @ np.linalg.solve(Uh @ U + lam * np.eye(n), Uh @ u)
        rhs = np.linalg.solve(U @ Uh + lam * np.eye(k), U @ Uh @ u)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_rrc_scores_match_explicit_projection(rng):
    X = shape.random_preshape_rows(10, 5, rng)
    y = _labels(5, 5)
    lam = 0.3
    m = rrc_fit(X, y, lam)
    q = shape.random_preshape_rows(1, 5, rng)[0]
    p = m.predict(q)
    for c in (0, 1):
        U = X[y == c].T
        proj = np.linalg.solve(U @ U.conj().T + lam * np.eye(5), U @ U.conj().T @ q)
        assert p.scores[c] == pytest.approx(np.linalg.norm(proj - q) ** 2, abs=1e-12)


def test_rrc_phase_invariant_labels(rng):
    ds = separated_dataset(per_class=20, noise_sd=0.05, n_classes=3, seed=4)
    X, y = ds.preshapes(), ds.labels
    m = rrc_fit(X, y, 0.1)
    Q = shape.random_preshape_rows(50, X.shape[1], rng)
    base = m.predict_labels(Q)
    rotated = m.predict_labels(Q * np.exp(1j * rng.uniform(0, 2 * np.pi, size=(50, 1))))
    np.testing.assert_array_equal(base, rotated)


def test_krrc_vwg_always_factorizes(rng):
    for _ in range(20):
        X = shape.random_preshape_rows(20, 5, rng)
        krrc_fit(X, _labels(10, 10), KernelSpec("vwg", 10 ** rng.uniform(-2, 2)), 10 ** rng.uniform(-8, 1))


def test_krrc_single_sample_per_class(rng):
    X = shape.random_preshape_rows(2, 4, rng)
    m = krrc_fit(X, [0, 1], KernelSpec("vwg", 1.0), 0.5)
    np.testing.assert_array_equal(m._grams[0], [[1.0]])
    assert m.predict(X[1]).label == 1


def test_krrc_one_by_one_algebra(rng):
    t, u = shape.random_preshape_rows(2, 5, rng)
    spec, lam = KernelSpec("vwg", 0.8), 0.25
    m = krrc_fit(t[None, :], [0], spec, lam)
    kappa = kernels.kernel_eval(spec, t, u)
    expected = kappa**2 * (1 + lam) ** -2 * (-1 - 2 * lam)
    assert m.predict(u).scores[0] == pytest.approx(expected, rel=1e-12)


def test_krrc_score_decreasing_in_kernel_value():
    lam = 0.1
    ks = np.linspace(0.01, 1, 50)
    scores = [krrc_scores(np.array([[1.0]]), np.array([kv]), lam) for kv in ks]
    assert np.all(np.diff(scores) < 0)


def test_krrc_single_class(rng):
    m = krrc_fit(shape.random_preshape_rows(4, 4, rng), _labels(4), KernelSpec("rie", 1.0), 0.1)
    for q in shape.random_preshape_rows(10, 4, rng):
        assert m.predict(q).label == 0


def test_kernel_trick_matches_explicit_features(rng):
    """Linear kernel Re<a,b> on real-embedded preshapes: the feature map is the identity."""
    for _ in range(100):
        k, lam = 4, 10 ** rng.uniform(-3, 1)
        n = int(rng.integers(1, 11))
        U = shape.random_preshape_rows(n, k, rng)
        u = shape.random_preshape_rows(1, k, rng)[0]
        Phi = np.concatenate([U.real, U.imag], axis=1).T  # (2k, n)
        phi_u = np.concatenate([u.real, u.imag])
        K = Phi.T @ Phi
        kvec = Phi.T @ phi_u
        assert np.allclose(K, np.real(U.conj() @ U.T))
        beta = np.linalg.solve(K + lam * np.eye(n), Phi.T @ phi_u)
        explicit = np.sum((Phi @ beta - phi_u) ** 2) - phi_u @ phi_u
        assert krrc_scores(K, kvec, lam) == pytest.approx(explicit, abs=1e-8)


def test_krrc_separated_clusters(rng):
    templates = shape.random_preshape_rows(2, 8, rng)
    X = np.vstack([shape.preshape_rows(t + 0.01 * (rng.standard_normal((15, 8)) + 1j * rng.standard_normal((15, 8))))
                   for t in templates])
    m = krrc_fit(X, _labels(15, 15), KernelSpec("vwg", 0.5), 1e-3)
    Q = shape.preshape_rows(templates[0] + 0.01 * (rng.standard_normal((1000, 8)) + 1j * rng.standard_normal((1000, 8))))
    assert np.mean(m.predict_labels(Q) == 0) >= 0.99


def test_krrc_resubstitution_on_separated_data():
    ds = separated_dataset(per_class=25, noise_sd=0.02, n_classes=3, seed=11)
    X, y = ds.preshapes(), ds.labels
    m = krrc_fit(X, y, KernelSpec("vwg", 0.1), 1e-8)
    assert np.all(m.predict_labels(X) == y)


@pytest.mark.parametrize("family", ["vwg", "fpg", "rie"])
def test_krrc_phase_invariant_predictions(rng, family):
    ds = separated_dataset(per_class=10, noise_sd=0.1, n_classes=3, seed=5)
    m = krrc_fit(ds.preshapes(), ds.labels, KernelSpec(family, 0.5), 0.01)
    Q = shape.random_preshape_rows(30, ds.k, rng)
    R = Q * np.exp(1j * rng.uniform(0, 2 * np.pi, size=(30, 1)))
    np.testing.assert_allclose(m.scores(Q), m.scores(R), atol=1e-10)
    np.testing.assert_array_equal(m.predict_labels(Q), m.predict_labels(R))


def _indefinite_witness():
    rng = np.random.default_rng(3)
    pool = shape.random_preshape_rows(200, 4, rng)
    w = kernels.find_psd_violation("rie", pool, [1, 3, 10], 20, 5000, rng)
    assert w is not None
    return pool[w.indices], w


def test_krrc_factorization_failure_on_witness():
    X, w = _indefinite_witness()
    lam = -w.min_eigenvalue / 2
    with pytest.raises(FactorizationFailure) as info:
        krrc_fit(X, np.zeros(len(X), dtype=int), KernelSpec("rie", w.sigma_sq), lam)
    assert info.value.label == 0
    assert info.value.min_eigenvalue < 0
    assert "class 0" in str(info.value)


def test_krrc_indefinite_fallback_warns():
    X, w = _indefinite_witness()
    lam = -w.min_eigenvalue / 2
    with pytest.warns(classifiers.IndefiniteKernelWarning):
        m = krrc_fit(X, np.zeros(len(X), dtype=int), KernelSpec("rie", w.sigma_sq), lam, allow_indefinite=True)
    assert m.used_indefinite_solve
    assert np.all(np.isfinite(m.scores(X)))


def test_normalize_scores_adds_one(rng):
    X = shape.random_preshape_rows(6, 4, rng)
    a = krrc_fit(X, _labels(3, 3), KernelSpec("vwg", 1), 0.1)
    b = krrc_fit(X, _labels(3, 3), KernelSpec("vwg", 1), 0.1, normalize_scores=True)
    np.testing.assert_allclose(b.scores(X), a.scores(X) + 1, atol=1e-15)
    assert np.all(b.scores(X) >= -1e-12)  # squared feature-space residual


def test_tie_goes_to_lowest_class(rng):
    u = shape.random_preshape_rows(1, 4, rng)
    X = np.vstack([u, u])
    m = krrc_fit(X, [0, 1], KernelSpec("vwg", 1), 0.1)
    p = m.predict(u[0])
    assert p.scores[0] == p.scores[1]
    assert p.label == 0


@pytest.mark.parametrize("kind", ["krrc", "rrc"])
def test_model_roundtrip(tmp_path, rng, kind):
    ds = separated_dataset(per_class=8, noise_sd=0.05, n_classes=3, seed=2)
    X, y = ds.preshapes(), ds.labels
    if kind == "krrc":
        m = krrc_fit(X, y, KernelSpec("fpg", 0.3), 0.01)
    else:
        m = rrc_fit(X, y, 0.01)
    path = tmp_path / "model.json"
    classifiers.save_model(m, path)
    m2 = classifiers.load_model(path)
    Q = shape.random_preshape_rows(20, ds.k, rng)
    np.testing.assert_array_equal(m.scores(Q), m2.scores(Q))


def test_model_document_fields(rng):
    m = krrc_fit(shape.random_preshape_rows(4, 3, rng), _labels(2, 2), KernelSpec("vwg", 2), 0.5)
    d = m.to_dict()
    assert d["format"] == "shapekrrc-model" and d["version"] == 1
    assert d["kernel"] == {"family": "vwg", "bandwidth_sq": 2.0}
    assert np.asarray(d["classes"][0]["shapes"]).shape == (2, 3, 2)
    with pytest.raises(InvalidInput):
        classifiers.model_from_dict({**d, "version": 99})


# -- extrinsic mean -----------------------------------------------------------

def test_mean_of_one_shape(rng):
    u = shape.random_preshape(6, rng)
    mu = extrinsic_mean([u])
    np.testing.assert_array_equal(mu.coords, u.coords)
    assert shape.extrinsic_dist_sq(mu, u) == 0.0


def test_mean_of_identical_copies(rng):
    u = shape.random_preshape(6, rng)
    copies = [u.rotate(t) for t in rng.uniform(0, 2 * np.pi, 7)]
    assert shape.extrinsic_dist_sq(extrinsic_mean(copies), u) <= 1e-14


def test_mean_phase_normalized(rng):
    mu = extrinsic_mean(shape.random_preshape_rows(5, 5, rng)).coords
    j = np.argmax(np.abs(mu))
    assert mu[j].imag == pytest.approx(0, abs=1e-15) and mu[j].real > 0


def _frechet(x, X):
    return sum(shape.extrinsic_dist_sq(x, u) for u in X)


def test_mean_minimizes_frechet_objective(rng):
    X = shape.random_preshape_rows(20, 4, rng)
    mu = extrinsic_mean(X)
    best = _frechet(mu, X)
    for scale in (1e-3, 1e-2, 1e-1, 1.0):
        for _ in range(100):
            cand = shape.preshape_rows(mu.coords[None, :] + scale * (rng.standard_normal(4) + 1j * rng.standard_normal(4)))[0]
            assert best <= _frechet(cand, X) + 1e-12


def test_mean_invariances(rng):
    X = shape.random_preshape_rows(12, 5, rng)
    mu = extrinsic_mean(X)
    rotated = X * np.exp(1j * rng.uniform(0, 2 * np.pi, size=(12, 1)))
    np.testing.assert_allclose(extrinsic_mean(rotated).coords, mu.coords, atol=1e-12)
    np.testing.assert_allclose(extrinsic_mean(X[rng.permutation(12)]).coords, mu.coords, atol=1e-12)


def test_mean_non_unique():
    a, b = orthogonal_pair_k3()
    with pytest.raises(NonUniqueMean):
        extrinsic_mean([a, b])
