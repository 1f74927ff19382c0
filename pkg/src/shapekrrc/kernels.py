"""Gaussian kernels on planar shape space and positive-definiteness diagnostics.

Every family has the form ``exp(-d^2(a, b) / bandwidth_sq)`` and differs only
in the squared distance ``d^2``:

==========  ===============================================
vwg         squared extrinsic (Veronese-Whitney) distance
fpg         squared full Procrustes distance
rie         squared Riemannian (geodesic) distance
euclidean   squared norm of the raw coordinate difference
==========  ===============================================

Since the extrinsic distance squared is twice the full Procrustes one,
``vwg`` at bandwidth ``s`` coincides with ``fpg`` at ``s / 2``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import shape
from .errors import EmptyInput, InvalidInput

PSD_TOL = 1e-8
VIOLATION_TOL = 1e-6


class KernelFamily(str, enum.Enum):
    VWG = "vwg"
    FPG = "fpg"
    INTRINSIC = "rie"
    EUCLIDEAN = "euclidean"

    @property
    def distance_kind(self) -> str:
        return _DIST_KIND[self]

    @classmethod
    def parse(cls, value) -> "KernelFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "intrinsic": cls.INTRINSIC,
            "intrinsicgaussian": cls.INTRINSIC,
            "riemannian": cls.INTRINSIC,
            "euclideangaussian": cls.EUCLIDEAN,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InvalidInput(f"unknown kernel family {value!r}") from None


_DIST_KIND = {
    KernelFamily.VWG: "extrinsic",
    KernelFamily.FPG: "full_procrustes",
    KernelFamily.INTRINSIC: "riemannian",
    KernelFamily.EUCLIDEAN: "euclidean",
}

_PAIR_DIST = {
    KernelFamily.VWG: shape.extrinsic_dist_sq,
    KernelFamily.FPG: lambda a, b: shape.full_procrustes_dist(a, b) ** 2,
    KernelFamily.INTRINSIC: lambda a, b: shape.riemannian_dist(a, b) ** 2,
    KernelFamily.EUCLIDEAN: shape.euclidean_dist_sq,
}


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily
    bandwidth_sq: float

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        bw = float(self.bandwidth_sq)
        if not np.isfinite(bw) or bw <= 0:
            raise InvalidInput(f"bandwidth_sq must be positive, got {self.bandwidth_sq!r}")
        object.__setattr__(self, "bandwidth_sq", bw)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "bandwidth_sq": self.bandwidth_sq}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["family"], d["bandwidth_sq"])


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray
    spec: KernelSpec

    @property
    def n(self) -> int:
        return self.values.shape[0]


def kernel_eval(spec: KernelSpec, a, b) -> float:
    return float(np.exp(-_PAIR_DIST[spec.family](a, b) / spec.bandwidth_sq))


def kernel_from_dist_sq(dist_sq: np.ndarray, bandwidth_sq: float) -> np.ndarray:
    return np.exp(-np.asarray(dist_sq) / bandwidth_sq)


def gram_dist_sq(family, shapes) -> np.ndarray:
    """Symmetric matrix of squared distances with an exactly zero diagonal."""
    family = KernelFamily.parse(family)
    X = shape.stack(shapes)
    if X.shape[0] == 0:
        raise EmptyInput("cannot build a Gram matrix from zero shapes")
    D = shape.pairwise_dist_sq(family.distance_kind, X)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def gram(spec: KernelSpec, shapes) -> GramMatrix:
    D = gram_dist_sq(spec.family, shapes)
    return GramMatrix(kernel_from_dist_sq(D, spec.bandwidth_sq), spec)


def cross_gram(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel values between rows of ``A`` (e.g. training shapes) and rows of ``B``."""
    D = shape.pairwise_dist_sq(spec.family.distance_kind, shape.stack(A), shape.stack(B))
    return kernel_from_dist_sq(D, spec.bandwidth_sq)


def min_eigenvalue(g: Union[GramMatrix, np.ndarray]) -> float:
    values = g.values if isinstance(g, GramMatrix) else np.asarray(g, dtype=float)
    return float(np.linalg.eigvalsh(values)[0])


def is_psd(g, tol: float = PSD_TOL) -> bool:
    return min_eigenvalue(g) >= -tol


def _dist_matrix(dist_sq, shapes) -> np.ndarray:
    if isinstance(dist_sq, (str, KernelFamily)):
        try:
            family = KernelFamily.parse(dist_sq)
            return gram_dist_sq(family, shapes)
        except InvalidInput:
            D = shape.pairwise_dist_sq(str(dist_sq), shapes)
            return 0.5 * (D + D.T)
    n = len(shapes)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = dist_sq(shapes[i], shapes[j])
    return D


def check_negative_type(
    dist_sq: Union[str, KernelFamily, Callable],
    shapes: Sequence,
    trials: int = 1000,
    rng: Optional[np.random.Generator] = None,
    alphas: Optional[np.ndarray] = None,
) -> float:
    """Largest ``sum_ij a_i a_j d^2(x_i, x_j)`` over zero-sum coefficient vectors.

    ``dist_sq`` is either a pairwise callable, a kernel family (its squared
    distance is used) or a distance kind understood by
    :func:`shapekrrc.shape.pairwise_dist_sq`. Random coefficients are drawn
    Gaussian, recentred to zero sum and scaled to unit norm, so the returned
    value is comparable across set sizes. Pass ``alphas`` (``trials x n``) to
    use explicit coefficients instead. A positive result is a certificate
    that ``d^2`` is not of negative type.
    """
    if not isinstance(shapes, np.ndarray):
        shapes = list(shapes)
    n = len(shapes)
    if n < 2:
        raise InvalidInput("negative-type check needs at least 2 shapes")
    D = _dist_matrix(dist_sq, shapes)
    if alphas is None:
        if trials < 1:
            raise InvalidInput("trials must be >= 1")
        rng = np.random.default_rng() if rng is None else rng
        alphas = rng.standard_normal((trials, n))
        alphas -= alphas.mean(axis=1, keepdims=True)
        alphas /= np.linalg.norm(alphas, axis=1, keepdims=True)
    else:
        alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
        if alphas.shape[1] != n:
            raise InvalidInput("alphas must have one column per shape")
    values = np.einsum("ti,ij,tj->t", alphas, D, alphas)
    return float(values.max())


@dataclass(frozen=True, eq=False)
class PsdWitness:
    indices: np.ndarray
    sigma_sq: float
    min_eigenvalue: float

    def to_dict(self, ids=None) -> dict:
        out = {
            "indices": [int(i) for i in self.indices],
            "sigma_sq": self.sigma_sq,
            "min_eigenvalue": self.min_eigenvalue,
        }
        if ids is not None:
            out["ids"] = [ids[i] for i in self.indices]
        return out


def find_psd_violation(
    family,
    shape_pool,
    sigma_grid: Sequence[float],
    subset_size: int,
    attempts: int,
    rng: Optional[np.random.Generator] = None,
    tol: float = VIOLATION_TOL,
) -> Optional[PsdWitness]:
    """Random search for a subset and bandwidth whose Gram matrix is indefinite.

    Returns the first hit with smallest eigenvalue below ``-tol``, or None.
    Finding nothing is not a proof of positive definiteness.
    """
    family = KernelFamily.parse(family)
    X = shape.stack(shape_pool)
    n = X.shape[0]
    if n <= subset_size:
        raise InvalidInput(f"shape pool ({n}) must be larger than subset_size ({subset_size})")
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    if sigma_grid.size == 0 or np.any(sigma_grid <= 0):
        raise InvalidInput("sigma_grid must be a nonempty list of positive values")
    if subset_size < 2:
        return None
    rng = np.random.default_rng() if rng is None else rng
    D = gram_dist_sq(family, X)
    for _ in range(attempts):
        idx = np.sort(rng.choice(n, size=subset_size, replace=False))
        s2 = float(sigma_grid[rng.integers(sigma_grid.size)])
        lam = min_eigenvalue(np.exp(-D[np.ix_(idx, idx)] / s2))
        if lam < -tol:
            return PsdWitness(idx, s2, lam)
    return None
