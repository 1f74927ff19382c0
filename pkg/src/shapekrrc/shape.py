"""Planar shape geometry: preshapes, the Veronese-Whitney embedding and shape distances.

Landmark configurations are complex k-vectors. A shape is stored as one
preshape (centered, unit norm); the rotation orbit is never materialized
because every quantity computed here depends only on ``|<a, b>|`` or
``u u*``, both of which are phase invariant.

The inner product conjugates its first argument: ``<a, b> = sum(conj(a) * b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateConfiguration, InvalidInput

DEGENERACY_TOL = 1e-12
CENTER_TOL = 1e-10
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LandmarkConfig:
    """A raw planar k-ad, landmarks as complex numbers ``x + iy``."""

    points: np.ndarray
    label: Optional[int] = None
    id: Optional[str] = None

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim != 1:
            raise InvalidInput(f"landmarks must be a 1-d complex vector, got shape {pts.shape}")
        if pts.shape[0] < 3:
            raise InvalidInput(f"a planar shape needs at least 3 landmarks, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("landmark coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_xy(cls, xy, label=None, id=None) -> "LandmarkConfig":
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return cls(xy[:, 0] + 1j * xy[:, 1], label=label, id=id)


@dataclass(frozen=True, eq=False)
class Preshape:
    """Centered, unit-norm complex k-vector."""

    coords: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.coords)
        if u.ndim != 1 or u.shape[0] < 3:
            raise InvalidInput(f"preshape must be a complex k-vector with k >= 3, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidInput("preshape coordinates must be finite")
        if abs(u.sum()) > CENTER_TOL:
            raise InvalidInput(f"preshape is not centered (|sum| = {abs(u.sum()):.3e})")
        if abs(np.linalg.norm(u) - 1.0) > NORM_TOL:
            raise InvalidInput(f"preshape does not have unit norm (norm = {np.linalg.norm(u)!r})")
        object.__setattr__(self, "coords", _frozen(u))

    @property
    def k(self) -> int:
        return self.coords.shape[0]

    def rotate(self, theta: float) -> "Preshape":
        return Preshape(np.exp(1j * theta) * self.coords)


@dataclass(frozen=True, eq=False)
class EmbeddedShape:
    """Rank-one Hermitian matrix ``u u*``."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))


ShapeLike = Union[Preshape, np.ndarray, Sequence[complex]]


def coords_of(u: ShapeLike) -> np.ndarray:
    return u.coords if isinstance(u, Preshape) else np.asarray(u, dtype=complex)


def stack(shapes) -> np.ndarray:
    """Stack preshapes (or an existing 2-d array) into an ``(n, k)`` complex array."""
    if isinstance(shapes, np.ndarray):
        arr = np.asarray(shapes, dtype=complex)
        return arr.reshape(1, -1) if arr.ndim == 1 else arr
    rows = [coords_of(s) for s in shapes]
    if not rows:
        return np.empty((0, 0), dtype=complex)
    return np.vstack(rows)


def to_preshape(config: Union[LandmarkConfig, ShapeLike]) -> Preshape:
    """Remove translation and scale: ``(z - mean(z)) / ||z - mean(z)||``."""
    if not isinstance(config, LandmarkConfig):
        config = LandmarkConfig(np.asarray(config, dtype=complex))
    z = config.points
    centered = z - z.mean()
    size = np.linalg.norm(centered)
    if size <= DEGENERACY_TOL:
        name = f"configuration {config.id!r}" if config.id is not None else "configuration"
        raise DegenerateConfiguration(f"{name} has coincident landmarks (size {size:.3e})")
    u = centered / size
    # re-center once more so roundoff in the mean does not leak past CENTER_TOL
    u = u - u.mean()
    return Preshape(u / np.linalg.norm(u))


def preshape_rows(z: np.ndarray) -> np.ndarray:
    """Vectorized ``to_preshape`` over the rows of an ``(n, k)`` array, without validation objects."""
    z = np.asarray(z, dtype=complex)
    c = z - z.mean(axis=1, keepdims=True)
    size = np.linalg.norm(c, axis=1, keepdims=True)
    if np.any(size <= DEGENERACY_TOL):
        bad = np.flatnonzero(size.ravel() <= DEGENERACY_TOL)
        raise DegenerateConfiguration(f"rows {bad.tolist()} have coincident landmarks")
    return c / size


def vw_embed(u: ShapeLike) -> EmbeddedShape:
    """Veronese-Whitney embedding ``u -> u u*``."""
    v = coords_of(u)
    return EmbeddedShape(np.outer(v, v.conj()))


def inner(a: ShapeLike, b: ShapeLike) -> complex:
    return complex(np.vdot(coords_of(a), coords_of(b)))


def _abs_inner(a, b) -> float:
    return min(abs(inner(a, b)), 1.0)


def _sin_sq(a, b) -> float:
    # 1 - |<a,b>|^2 via the Lagrange identity sum_{i<j} |a_i b_j - a_j b_i|^2.
    # Real arithmetic keeps every product commutative, so a == b gives an exact zero.
    a, b = coords_of(a), coords_of(b)
    ar, ai, br, bi = a.real, a.imag, b.real, b.imag
    re = np.outer(ar, br) - np.outer(ai, bi)
    im = np.outer(ar, bi) + np.outer(ai, br)
    return float(min(0.5 * np.sum((re - re.T) ** 2 + (im - im.T) ** 2), 1.0))


def riemannian_dist(a: ShapeLike, b: ShapeLike) -> float:
    """Geodesic distance ``arccos |<a, b>|`` on shape space, in ``[0, pi/2]``.

    Evaluated as ``atan2(sin, cos)``; plain arccos loses half the digits
    near zero distance.
    """
    return float(np.arctan2(np.sqrt(_sin_sq(a, b)), _abs_inner(a, b)))


def full_procrustes_dist(a: ShapeLike, b: ShapeLike) -> float:
    """``sqrt(1 - |<a, b>|^2)``, in ``[0, 1]``."""
    return float(np.sqrt(_sin_sq(a, b)))


def partial_procrustes_dist_sq(a: ShapeLike, b: ShapeLike) -> float:
    """``1 - |<a, b>|``, in ``[0, 1]``."""
    return _sin_sq(a, b) / (1.0 + _abs_inner(a, b))


def extrinsic_dist_sq(a: ShapeLike, b: ShapeLike) -> float:
    """Squared Frobenius distance between the VW embeddings of ``a`` and ``b``."""
    d = vw_embed(a).matrix - vw_embed(b).matrix
    return float(np.real(np.trace(d.conj().T @ d)))


def euclidean_dist_sq(a: ShapeLike, b: ShapeLike) -> float:
    """Plain squared norm of ``a - b``; not phase invariant."""
    d = coords_of(a) - coords_of(b)
    return float(np.real(np.vdot(d, d)))


# -- vectorized pairwise forms (rows of A against rows of B) -----------------

def abs_inner_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.minimum(np.abs(A.conj() @ B.T), 1.0)


def pairwise_dist_sq(kind: str, A, B=None) -> np.ndarray:
    """Squared distances between rows of ``A`` and ``B``.

    ``kind`` is one of ``extrinsic``, ``full_procrustes``, ``riemannian``,
    ``partial_procrustes`` or ``euclidean``. The extrinsic form uses the
    identity ``2 (1 - |<a, b>|^2)``.
    """
    A = stack(A)
    B = A if B is None else stack(B)
    if kind == "euclidean":
        d = (
            np.sum(np.abs(A) ** 2, axis=1)[:, None]
            + np.sum(np.abs(B) ** 2, axis=1)[None, :]
            - 2.0 * np.real(A.conj() @ B.T)
        )
        return np.maximum(d, 0.0)
    g = abs_inner_matrix(A, B)
    if kind == "extrinsic":
        return 2.0 * (1.0 - g**2)
    if kind == "full_procrustes":
        return 1.0 - g**2
    if kind == "riemannian":
        return np.arccos(g) ** 2
    if kind == "partial_procrustes":
        return 1.0 - g
    raise InvalidInput(f"unknown distance kind {kind!r}")


# -- SU(k) equivariance -----------------------------------------------------

def is_special_unitary(A: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    eye = np.eye(A.shape[0])
    return bool(np.max(np.abs(A @ A.conj().T - eye)) <= tol and abs(np.linalg.det(A) - 1.0) <= tol)


def check_equivariance(u: ShapeLike, A: np.ndarray) -> float:
    """Max entrywise deviation between ``J(A u)`` and ``A J(u) A*``."""
    A = np.asarray(A, dtype=complex)
    v = coords_of(u)
    if A.shape != (v.shape[0], v.shape[0]) or not is_special_unitary(A):
        raise InvalidInput("A must be a special unitary matrix matching the landmark count")
    Av = A @ v
    lhs = np.outer(Av, Av.conj())
    rhs = A @ vw_embed(v).matrix @ A.conj().T
    return float(np.max(np.abs(lhs - rhs)))


# -- random generators -------------------------------------------------------

def random_special_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Gaussian matrix, phases of R folded into Q, then det fixed to 1."""
    Z = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    Q = Q * (d / np.abs(d))
    Q[:, 0] /= np.linalg.det(Q)
    return Q


def random_preshape_rows(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` preshapes from centered complex Gaussian configurations."""
    z = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return preshape_rows(z)


def random_preshape(k: int, rng: np.random.Generator) -> Preshape:
    return Preshape(random_preshape_rows(1, k, rng)[0])
