import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shapekrrc import data, shape


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def orthogonal_pair_k3():
    a = np.array([1, -1, 0]) / np.sqrt(2)
    b = np.array([1, 1, -2]) / np.sqrt(6)
    return shape.Preshape(a.astype(complex)), shape.Preshape(b.astype(complex))


def separated_dataset(per_class=30, noise_sd=0.01, k=6, n_classes=2, seed=0):
    rng = np.random.default_rng(seed)
    templates = shape.random_preshape_rows(n_classes, k, rng)
    return data.generate_synthetic(templates, per_class, noise_sd, seed + 1)


finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@st.composite
def configurations(draw, k=None):
    k = draw(st.integers(3, 12)) if k is None else k
    xy = draw(arrays(np.float64, (k, 2), elements=finite))
    z = xy[:, 0] + 1j * xy[:, 1]
    # keep away from the degenerate (all-coincident) configuration
    if np.linalg.norm(z - z.mean()) < 1e-3:
        z = z + np.arange(k)
    return z


@st.composite
def preshape_pairs(draw):
    k = draw(st.integers(3, 12))
    a = shape.to_preshape(draw(configurations(k=k)))
    b = shape.to_preshape(draw(configurations(k=k)))
    return a, b
