"""Subspace regression classifiers on preshapes and the extrinsic mean.

Two classifiers share the same decision rule: regress the query onto the
span of each class's training samples (ridge penalty ``lam``) and pick the
class whose projection is closest.

* :class:`NaiveRrc` works directly on complex preshape vectors.
* :class:`Krrc` does the same regression in the feature space of a kernel,
  touching only Gram matrices. Its scores are
  ``k^T (K + lam I)^-1 (-K - 2 lam I) (K + lam I)^-1 k``, i.e. the squared
  feature-space residual minus the constant ``kappa(u, u)``; they can be
  negative and only their argmin is meaningful.

Ties between classes go to the lowest class index.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from . import shape
from .errors import EmptyClass, EmptyInput, FactorizationFailure, InvalidInput, NonUniqueMean
from .kernels import KernelSpec, cross_gram, gram, min_eigenvalue

MODEL_FORMAT = "shapekrrc-model"
MODEL_VERSION = 1
MEAN_GAP_TOL = 1e-10


class IndefiniteKernelWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Prediction:
    label: int
    scores: Dict[int, float]


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidInput(f"ridge parameter must be positive, got {lam!r}")
    return lam


def group_by_class(shapes, labels, class_labels=None):
    """Split ``(n, k)`` shapes into per-class blocks following ``class_labels`` order."""
    X = shape.stack(shapes)
    labels = np.asarray(labels)
    if X.shape[0] != labels.shape[0]:
        raise InvalidInput("shapes and labels differ in length")
    if X.shape[0] == 0:
        raise EmptyInput("no training shapes")
    if class_labels is None:
        class_labels = sorted({int(c) for c in labels})
    blocks = []
    for c in class_labels:
        block = X[labels == c]
        if block.shape[0] == 0:
            raise EmptyClass(f"class {c} has no training samples")
        blocks.append(block)
    return [int(c) for c in class_labels], blocks


def _argmin_rows(S: np.ndarray) -> np.ndarray:
    # np.argmin returns the first occurrence, i.e. the lowest class index
    return np.argmin(S, axis=1)


class _Classifier:
    class_labels: List[int]

    def scores(self, queries) -> np.ndarray:  # (m, C)
        raise NotImplementedError

    def predict_labels(self, queries) -> np.ndarray:
        S = self.scores(queries)
        return np.asarray(self.class_labels)[_argmin_rows(S)]

    def predict(self, u) -> Prediction:
        S = self.scores(shape.stack([u]))[0]
        i = int(_argmin_rows(S[None, :])[0])
        return Prediction(self.class_labels[i], {c: float(s) for c, s in zip(self.class_labels, S)})


@dataclass(frozen=True, eq=False)
class NaiveRrc(_Classifier):
    """Complex ridge-regression classifier; ``per_class_data[i]`` is ``U_(i)`` (k x n_i)."""

    per_class_data: List[np.ndarray]
    lam: float
    class_labels: List[int]

    def scores(self, queries) -> np.ndarray:
        Q = shape.stack(queries)  # (m, k)
        out = np.empty((Q.shape[0], len(self.class_labels)))
        for i, U in enumerate(self.per_class_data):
            A = U.conj().T @ U + self.lam * np.eye(U.shape[1])
            beta = scipy.linalg.solve(A, U.conj().T @ Q.T, assume_a="pos")
            resid = U @ beta - Q.T
            out[:, i] = np.sum(np.abs(resid) ** 2, axis=0)
        return out

    def to_dict(self) -> dict:
        return _model_dict("naive-rrc", self.class_labels, self.lam, None,
                           [U.T for U in self.per_class_data])


def rrc_fit(shapes, labels, lam: float, class_labels=None) -> NaiveRrc:
    lam = _check_lambda(lam)
    class_labels, blocks = group_by_class(shapes, labels, class_labels)
    return NaiveRrc([np.ascontiguousarray(b.T) for b in blocks], lam, class_labels)


def rrc_predict(model: NaiveRrc, u) -> Prediction:
    return model.predict(u)


class _Factor:
    """Solve handle for ``K + lam I``: Cholesky, or LU when indefinite and allowed."""

    def __init__(self, A: np.ndarray, allow_indefinite: bool, label):
        self.indefinite = False
        try:
            self._cho = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
            self._lu = None
        except np.linalg.LinAlgError:
            lam_min = min_eigenvalue(A)
            msg = f"K + lambda*I for class {label} is not positive definite (min eigenvalue {lam_min:.3e})"
            if not allow_indefinite:
                raise FactorizationFailure(msg, label=label, min_eigenvalue=lam_min) from None
            warnings.warn(msg + "; falling back to an indefinite solve", IndefiniteKernelWarning, stacklevel=4)
            self.indefinite = True
            self._cho = None
            self._lu = scipy.linalg.lu_factor(A, check_finite=False)

    def solve(self, B: np.ndarray) -> np.ndarray:
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, B, check_finite=False)
        return scipy.linalg.lu_solve(self._lu, B, check_finite=False)


def krrc_scores(K: np.ndarray, k: np.ndarray, lam: float, factor=None) -> np.ndarray:
    """Kernel-trick objective for one class.

    ``K`` is the class Gram matrix (n x n), ``k`` holds kernel values between
    the class samples and ``m`` queries (n x m). Returns ``m`` scores.
    """
    K = np.asarray(K, dtype=float)
    k = np.asarray(k, dtype=float)
    squeeze = k.ndim == 1
    if squeeze:
        k = k[:, None]
    n = K.shape[0]
    if factor is None:
        factor = _Factor(K + lam * np.eye(n), allow_indefinite=True, label=None)
    B = factor.solve(k)
    M = -K - 2.0 * lam * np.eye(n)
    s = np.einsum("im,im->m", B, M @ B)
    return s[0] if squeeze else s


@dataclass(frozen=True, eq=False)
class Krrc(_Classifier):
    per_class_shapes: List[np.ndarray]
    kernel: KernelSpec
    lam: float
    class_labels: List[int]
    allow_indefinite: bool = False
    normalize_scores: bool = False
    _grams: List[np.ndarray] = field(default_factory=list, repr=False)
    _factors: List[_Factor] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._factors:
            for label, X in zip(self.class_labels, self.per_class_shapes):
                K = gram(self.kernel, X).values
                self._grams.append(K)
                self._factors.append(
                    _Factor(K + self.lam * np.eye(K.shape[0]), self.allow_indefinite, label)
                )

    @property
    def used_indefinite_solve(self) -> bool:
        return any(f.indefinite for f in self._factors)

    def scores(self, queries) -> np.ndarray:
        Q = shape.stack(queries)
        out = np.empty((Q.shape[0], len(self.class_labels)))
        for i, (X, K, f) in enumerate(zip(self.per_class_shapes, self._grams, self._factors)):
            out[:, i] = krrc_scores(K, cross_gram(self.kernel, X, Q), self.lam, f)
        if self.normalize_scores:
            out += 1.0  # kappa(u, u) = 1 for every family
        return out

    def to_dict(self) -> dict:
        d = _model_dict("krrc", self.class_labels, self.lam, self.kernel.to_dict(), self.per_class_shapes)
        d["allow_indefinite"] = self.allow_indefinite
        d["normalize_scores"] = self.normalize_scores
        return d


def krrc_fit(shapes, labels, kernel: KernelSpec, lam: float, class_labels=None,
             allow_indefinite: bool = False, normalize_scores: bool = False) -> Krrc:
    lam = _check_lambda(lam)
    class_labels, blocks = group_by_class(shapes, labels, class_labels)
    blocks = [np.array(b) for b in blocks]
    return Krrc(blocks, kernel, lam, class_labels, allow_indefinite, normalize_scores)


def krrc_predict(model: Krrc, u) -> Prediction:
    return model.predict(u)


# -- serialization -----------------------------------------------------------

def _complex_to_pairs(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _model_dict(kind, class_labels, lam, kernel, per_class_rows) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "model": kind,
        "class_labels": list(class_labels),
        "lambda": lam,
        "kernel": kernel,
        "classes": [
            {"label": c, "shapes": _complex_to_pairs(np.asarray(X))}
            for c, X in zip(class_labels, per_class_rows)
        ],
    }


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
        raise InvalidInput("not a shapekrrc model document (format/version mismatch)")
    labels = [int(c) for c in d["class_labels"]]
    blocks = [_pairs_to_complex(c["shapes"]) for c in d["classes"]]
    if d["model"] == "naive-rrc":
        return NaiveRrc([b.T.copy() for b in blocks], _check_lambda(d["lambda"]), labels)
    if d["model"] == "krrc":
        return Krrc(blocks, KernelSpec.from_dict(d["kernel"]), _check_lambda(d["lambda"]), labels,
                    bool(d.get("allow_indefinite", False)), bool(d.get("normalize_scores", False)))
    raise InvalidInput(f"unknown model type {d['model']!r}")


def save_model(model, path) -> None:
    from .data import atomic_write_text

    atomic_write_text(path, json.dumps(model.to_dict()))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


# -- extrinsic mean -----------------------------------------------------------

def normalize_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so that its largest-modulus entry is real and positive."""
    j = int(np.argmax(np.abs(v)))
    return v * (np.conj(v[j]) / abs(v[j]))


def extrinsic_mean(shapes: Sequence) -> shape.Preshape:
    """Top eigenvector of ``mean(u u*)``; the Frechet mean under the extrinsic distance."""
    X = shape.stack(shapes)
    if X.shape[0] == 0:
        raise EmptyInput("extrinsic mean of an empty sample")
    if X.shape[0] == 1:
        # u u* has u itself as its top eigenvector; skip eigh so the input comes back bit-for-bit
        return shape.Preshape(X[0])
    M = (X.T @ X.conj()) / X.shape[0]
    M = 0.5 * (M + M.conj().T)
    w, V = np.linalg.eigh(M)
    if w.shape[0] > 1 and w[-1] - w[-2] < MEAN_GAP_TOL:
        raise NonUniqueMean(f"top eigenvalues {w[-1]!r} and {w[-2]!r} are tied; the extrinsic mean is not unique")
    v = normalize_phase(V[:, -1])
    v = v - v.mean()
    return shape.Preshape(v / np.linalg.norm(v))
