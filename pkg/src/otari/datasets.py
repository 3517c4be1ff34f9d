"""Dataset ingestion and synthesis.

IDX ingestion is bit-exact against the de-facto MNIST layout: big-endian
magic, dimension header, unsigned bytes. CSV is the RFC-4180 subset with
a mandatory header row. The cluster generator fabricates domain shift by
rotating the first two coordinates.
"""

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CostMatrix
from .errors import (
    BadMagic,
    CountMismatch,
    DimensionMismatch,
    DomainViolation,
    ParseError,
    TruncatedFile,
)

IDX_MAGIC_LABELS = 0x00000801
IDX_MAGIC_IMAGES = 0x00000803


@dataclass
class LabeledDataset:
    """Point cloud with integer class labels."""

    points: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.points.ndim != 2:
            raise DimensionMismatch(f"points must be 2-d, got shape {self.points.shape}")
        if self.labels.shape != (self.points.shape[0],):
            raise DimensionMismatch(
                f"{self.points.shape[0]} points but {self.labels.size} labels"
            )
        if not np.isfinite(self.points).all():
            raise DomainViolation("points contain NaN or infinity")
        if (self.labels < 0).any():
            raise DomainViolation("labels must be nonnegative")

    def __len__(self):
        return self.points.shape[0]


def _read_idx_header(raw, path, expected_magic, ndim):
    if len(raw) < 4 * (1 + ndim):
        raise TruncatedFile(f"{path}: header truncated")
    magic = struct.unpack(">i", raw[:4])[0]
    if magic != expected_magic:
        raise BadMagic(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = struct.unpack(f">{ndim}i", raw[4 : 4 * (1 + ndim)])
    return dims, raw[4 * (1 + ndim) :]


def _labels_path_for(images_path):
    name = Path(images_path).name.replace("images", "labels").replace("idx3", "idx1")
    guess = Path(images_path).with_name(name)
    if name == Path(images_path).name or not guess.exists():
        raise CountMismatch(
            f"no labels file found alongside {images_path}; pass labels_path explicitly"
        )
    return guess


def load_idx(images_path, labels_path=None) -> LabeledDataset:
    """Load a paired IDX image/label file set, pixels scaled to [0, 1].

    labels_path defaults to the conventional sibling name
    (images->labels, idx3->idx1).
    """
    if labels_path is None:
        labels_path = _labels_path_for(images_path)
    raw = Path(images_path).read_bytes()
    (n, rows, cols), body = _read_idx_header(raw, images_path, IDX_MAGIC_IMAGES, 3)
    if len(body) < n * rows * cols:
        raise TruncatedFile(f"{images_path}: expected {n * rows * cols} pixels, got {len(body)}")
    images = np.frombuffer(body[: n * rows * cols], dtype=np.uint8)
    points = images.reshape(n, rows * cols).astype(float) / 255.0

    raw = Path(labels_path).read_bytes()
    (n_labels,), body = _read_idx_header(raw, labels_path, IDX_MAGIC_LABELS, 1)
    if len(body) < n_labels:
        raise TruncatedFile(f"{labels_path}: expected {n_labels} labels, got {len(body)}")
    if n_labels != n:
        raise CountMismatch(f"{n} images but {n_labels} labels")
    labels = np.frombuffer(body[:n_labels], dtype=np.uint8).astype(int)
    return LabeledDataset(points, labels, name=Path(images_path).stem)


def load_csv(path, label_column) -> LabeledDataset:
    """Load a rectangular numeric CSV with a header row. Rows keep file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}", line=1)
        label_idx = header.index(label_column)
        width = len(header)
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"{path}: expected {width} fields, got {len(row)}", line=lineno
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            label = values.pop(label_idx)
            if label != int(label):
                raise ParseError(f"{path}: non-integer label {label!r}", line=lineno)
            feats.append(values)
            labels.append(int(label))
    if not feats:
        raise ParseError(f"{path}: no data rows", line=1)
    return LabeledDataset(np.array(feats), np.array(labels), name=Path(path).stem)


def gen_gaussian_clusters(
    k, n_per_cluster, d=2, spread=3.0, rotation_deg=0.0, noise=0.1, seed=0
) -> LabeledDataset:
    """k isotropic Gaussian clusters on a circle of radius `spread`.

    The rotation acts on the first two coordinates of every point, so a
    rotated copy of a dataset shares its cluster structure but not its
    embedding. Deterministic under seed.
    """
    if k < 1:
        raise DomainViolation(f"k must be >= 1, got {k}")
    if d < 2:
        raise DomainViolation(f"d must be >= 2, got {d}")
    rng = np.random.default_rng(seed)
    angles = 2.0 * math.pi * np.arange(k) / k
    centers = np.zeros((k, d))
    centers[:, 0] = spread * np.cos(angles)
    centers[:, 1] = spread * np.sin(angles)
    points = np.repeat(centers, n_per_cluster, axis=0)
    points = points + noise * rng.standard_normal(points.shape)
    if rotation_deg:
        theta = math.radians(rotation_deg)
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        points[:, :2] = points[:, :2] @ rot.T
    labels = np.repeat(np.arange(k), n_per_cluster)
    return LabeledDataset(points, labels, name=f"clusters-k{k}")


def squared_euclidean_cost(X_S, X_T) -> CostMatrix:
    """Pairwise squared Euclidean distances, symmetric with a zero
    diagonal when both clouds are the same array."""
    X_S = np.asarray(X_S, dtype=float)
    X_T = np.asarray(X_T, dtype=float)
    if X_S.ndim != 2 or X_T.ndim != 2 or X_S.shape[1] != X_T.shape[1]:
        raise DimensionMismatch(f"feature dims differ: {X_S.shape} vs {X_T.shape}")
    sq_s = (X_S * X_S).sum(axis=1)
    sq_t = (X_T * X_T).sum(axis=1)
    D = sq_s[:, None] + sq_t[None, :] - 2.0 * (X_S @ X_T.T)
    np.maximum(D, 0.0, out=D)
    if X_S is X_T or (X_S.shape == X_T.shape and np.array_equal(X_S, X_T)):
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return CostMatrix(D)
