"""Landmark CSV ingestion, synthetic shape data and atomic output helpers.

Canonical CSV layout::

    id,label,x1,y1,x2,y2,...,xk,yk

Labels are non-negative integers. Display names for labels live in an
optional sidecar ``classes.json`` (``{"0": "name", ...}``) next to the CSV.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import shape
from .errors import InconsistentLandmarkCount, InvalidInput, ParseError, UnknownLabel
from .shape import LandmarkConfig


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt_float(x: float) -> str:
    # repr is the shortest string that round-trips a double
    return repr(float(x))


@dataclass(frozen=True, eq=False)
class LandmarkDataset:
    records: List[LandmarkConfig]
    k: int
    class_names: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for r in self.records:
            if r.k != self.k:
                raise InconsistentLandmarkCount(f"record {r.id!r} has {r.k} landmarks, expected {self.k}")
            if r.label is not None and r.label not in self.class_names:
                raise UnknownLabel(f"record {r.id!r} has label {r.label} missing from class names")

    def __len__(self):
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=int)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    @property
    def classes(self) -> List[int]:
        return sorted(self.class_names)

    def configurations(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.k), dtype=complex)
        return np.vstack([r.points for r in self.records])

    def preshapes(self) -> np.ndarray:
        """All records as an ``(n, k)`` array of preshapes."""
        return shape.preshape_rows(self.configurations())

    def subset(self, idx) -> "LandmarkDataset":
        return LandmarkDataset([self.records[i] for i in idx], self.k, dict(self.class_names))


def _sidecar_path(path: Path) -> Path:
    return path.with_name("classes.json")


def load_class_names(path) -> Dict[int, str]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        return {int(k): str(v) for k, v in raw.items()}
    except (ValueError, AttributeError) as exc:
        raise ParseError(f"{path}: class map must be an object keyed by integer labels") from exc


def load_landmark_csv(path, classes_json=None, k: Optional[int] = None) -> LandmarkDataset:
    """Read the canonical landmark CSV.

    ``classes_json`` defaults to a ``classes.json`` beside the CSV when one
    exists; without it, every label seen becomes its own class named by
    its number and no label can be unknown.
    """
    path = Path(path)
    if classes_json is None and _sidecar_path(path).exists():
        classes_json = _sidecar_path(path)
    names = load_class_names(classes_json) if classes_json is not None else None

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, missing header", line=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "id" or header[1] != "label" or (len(header) - 2) % 2:
            raise ParseError("header must be id,label,x1,y1,...,xk,yk", line=1)
        k_header = (len(header) - 2) // 2
        if k is not None and k != k_header:
            raise InconsistentLandmarkCount(f"header has {k_header} landmarks, expected {k}", line=1)
        k = k_header
        records = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 + 2 * k:
                raise InconsistentLandmarkCount(
                    f"expected {k} coordinate pairs, found {(len(row) - 2) / 2:g}", line=lineno
                )
            try:
                label = int(row[1])
            except ValueError:
                raise ParseError(f"label {row[1]!r} is not an integer", line=lineno) from None
            if label < 0:
                raise ParseError(f"label {label} is negative", line=lineno)
            if names is not None and label not in names:
                raise UnknownLabel(f"label {label} not in class map", line=lineno)
            try:
                xy = np.array([float(c) for c in row[2:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not np.all(np.isfinite(xy)):
                raise ParseError("non-finite coordinate", line=lineno)
            try:
                records.append(LandmarkConfig.from_xy(xy, label=label, id=row[0]))
            except InvalidInput as exc:
                raise ParseError(str(exc), line=lineno) from None
    if names is None:
        names = {lab: str(lab) for lab in sorted({r.label for r in records})}
    return LandmarkDataset(records, k, names)


def dataset_to_csv(ds: LandmarkDataset, points: Optional[np.ndarray] = None) -> str:
    """Serialize to canonical CSV text; ``points`` overrides coordinates row by row."""
    points = ds.configurations() if points is None else np.asarray(points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["id", "label"]
    for j in range(1, ds.k + 1):
        header += [f"x{j}", f"y{j}"]
    w.writerow(header)
    for rec, z in zip(ds.records, points):
        row = [rec.id, rec.label]
        for p in z:
            row += [fmt_float(p.real), fmt_float(p.imag)]
        w.writerow(row)
    return buf.getvalue()


def save_landmark_csv(ds: LandmarkDataset, path, points=None, write_classes: bool = True) -> None:
    path = Path(path)
    atomic_write_text(path, dataset_to_csv(ds, points))
    if write_classes:
        sidecar = {str(k): v for k, v in sorted(ds.class_names.items())}
        atomic_write_text(_sidecar_path(path), json.dumps(sidecar, indent=2) + "\n")


def generate_synthetic(templates: Sequence, per_class: int, noise_sd: float, seed: int) -> LandmarkDataset:
    """Template plus i.i.d. complex Gaussian landmark noise, one class per template.

    The configurations are returned un-normalized; callers take preshapes.
    """
    T = shape.stack(templates)
    if T.shape[0] == 0:
        raise InvalidInput("need at least one template")
    if noise_sd <= 0:
        raise InvalidInput("noise_sd must be positive")
    if per_class < 0:
        raise InvalidInput("per_class must be non-negative")
    rng = np.random.default_rng(seed)
    k = T.shape[1]
    records = []
    for c, t in enumerate(T):
        noise = noise_sd * (rng.standard_normal((per_class, k)) + 1j * rng.standard_normal((per_class, k)))
        for j, z in enumerate(t + noise):
            records.append(LandmarkConfig(z, label=c, id=f"syn-{c}-{j}"))
    return LandmarkDataset(records, k, {c: f"class{c}" for c in range(T.shape[0])})


def synthetic_templates(n_classes: int, k: int, spread: float, seed: int) -> np.ndarray:
    """Class templates as perturbations of one common random base shape.

    ``spread`` is the size of each class's deviation from the base relative
    to the unit-norm base; small values give overlapping, hard-to-separate
    classes.
    """
    rng = np.random.default_rng(seed)
    base = shape.random_preshape_rows(1, k, rng)[0]
    dev = shape.random_preshape_rows(n_classes, k, rng)
    return shape.preshape_rows(base[None, :] + spread * dev)
