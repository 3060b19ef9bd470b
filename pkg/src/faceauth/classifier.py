"""One-vs-rest linear SVM on embeddings.

Each class gets a binary C-regularized squared-hinge separator fitted by
dual coordinate descent. The bias is trained as an augmented constant
feature, so it is regularized along with the weights; the per-class
objective is

    0.5 * (||w||^2 + b^2) + C * sum_i max(0, 1 - y_i (w.x_i + b))^2

Training is deterministic given (data, config): every binary subproblem
shuffles sample order with the same seeded generator, and all arithmetic
is sequential.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from faceauth.errors import FaceAuthError

_MAGIC = b"FAGM"
_FORMAT_VERSION = 1


class ClassifierError(FaceAuthError):
    pass


class SingleClass(ClassifierError):
    """Training data contains fewer than two distinct labels."""


class EmptyDataset(ClassifierError):
    pass


class DimensionMismatch(ClassifierError):
    pass


class IoFailure(ClassifierError):
    pass


class FormatVersionMismatch(ClassifierError):
    """Model file has wrong magic, version, or structure."""


class ChecksumMismatch(ClassifierError):
    """Model file bytes fail the integrity check."""


@dataclass(frozen=True)
class TrainConfig:
    hyper_c: float = 1.0
    seed: int = 0
    max_epochs: int = 1000
    tolerance: float = 1e-4

    def __post_init__(self) -> None:
        if self.hyper_c <= 0.0:
            raise ValueError(f"hyper_c must be positive, got {self.hyper_c}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Immutable trained model: per-class weight rows and biases.

    classes is the ordered label list; row k of ``weights`` and entry k
    of ``biases`` belong to classes[k].
    """

    classes: tuple[str, ...]
    weights: np.ndarray  # (k, d) float64
    biases: np.ndarray  # (k,) float64
    hyper_c: float
    seed: int

    def __post_init__(self) -> None:
        if len(self.classes) < 2:
            raise SingleClass(f"need >= 2 classes, got {len(self.classes)}")
        if self.weights.shape[0] != len(self.classes) or self.biases.shape != (len(self.classes),):
            raise DimensionMismatch(
                f"classes {len(self.classes)} vs weights {self.weights.shape} "
                f"vs biases {self.biases.shape}"
            )

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _dual_cd(
    features: np.ndarray,
    targets: np.ndarray,
    diag: np.ndarray,
    inv_2c: float,
    max_epochs: int,
    tolerance: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Dual coordinate descent for one binary squared-hinge subproblem.

    features already carries the bias column. Converged when a full
    epoch moves no dual variable by tolerance or more. Returns the
    primal weights and the dual variables.
    """
    n = features.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(features.shape[1])

    def settled() -> bool:
        # prospective steps at the current point, without updating
        for i in range(n):
            grad = targets[i] * float(features[i] @ w) - 1.0 + alpha[i] * inv_2c
            if abs(max(alpha[i] - grad / diag[i], 0.0) - alpha[i]) >= tolerance:
                return False
        return True

    for _ in range(max_epochs):
        order = rng.permutation(n)
        max_step = 0.0
        for i in order:
            row = features[i]
            grad = targets[i] * float(row @ w) - 1.0 + alpha[i] * inv_2c
            new_alpha = alpha[i] - grad / diag[i]
            if new_alpha < 0.0:
                new_alpha = 0.0
            step = new_alpha - alpha[i]
            if step != 0.0:
                w += (step * targets[i]) * row
                alpha[i] = new_alpha
                if abs(step) > max_step:
                    max_step = abs(step)
        if max_step < tolerance and settled():
            break
    return w, alpha


def train(
    embeddings: np.ndarray,
    labels: Sequence[str],
    cfg: TrainConfig = TrainConfig(),
) -> SvmModel:
    """Fit a one-vs-rest linear SVM.

    Raises:
        EmptyDataset: no samples.
        DimensionMismatch: embeddings are ragged or not 2-d, or label
            count differs from row count.
        SingleClass: fewer than two distinct labels.
    """
    try:
        x = np.asarray(embeddings, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch(f"embeddings are not a rectangular array: {exc}") from exc
    if x.size == 0:
        raise EmptyDataset("no training samples")
    if x.ndim != 2:
        raise DimensionMismatch(f"embeddings must be 2-d, got shape {x.shape}")
    labels = [str(l) for l in labels]
    if len(labels) != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} embeddings but {len(labels)} labels")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise SingleClass(f"need >= 2 distinct labels, got {classes}")

    n, dim = x.shape
    augmented = np.hstack([x, np.ones((n, 1))])
    inv_2c = 1.0 / (2.0 * cfg.hyper_c)
    diag = np.einsum("ij,ij->i", augmented, augmented) + inv_2c

    weights = np.zeros((len(classes), dim))
    biases = np.zeros(len(classes))
    label_arr = np.array(labels)
    for k, cls in enumerate(classes):
        targets = np.where(label_arr == cls, 1.0, -1.0)
        rng = np.random.default_rng(cfg.seed)
        w, _ = _dual_cd(augmented, targets, diag, inv_2c, cfg.max_epochs, cfg.tolerance, rng)
        weights[k] = w[:dim]
        biases[k] = w[dim]
    return SvmModel(
        classes=classes, weights=weights, biases=biases, hyper_c=cfg.hyper_c, seed=cfg.seed
    )


def decision_scores(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Per-class scores w_k . x + b_k, in class order."""
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != model.dim:
        raise DimensionMismatch(f"embedding dim {vec.shape[0]} != model dim {model.dim}")
    return model.weights @ vec + model.biases


def predict(model: SvmModel, x: np.ndarray) -> str:
    """Label with the highest decision score; ties go to class order."""
    return model.classes[int(np.argmax(decision_scores(model, x)))]


def predict_many(model: SvmModel, embeddings: np.ndarray) -> list[str]:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimensionMismatch(f"expected (n, {model.dim}), got {x.shape}")
    scores = x @ model.weights.T + model.biases
    return [model.classes[i] for i in np.argmax(scores, axis=1)]


def objective(
    embeddings: np.ndarray, targets: np.ndarray, w: np.ndarray, b: float, hyper_c: float
) -> float:
    """Binary regularized squared-hinge objective this trainer minimizes
    (bias regularized, matching the augmented-feature formulation)."""
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    margins = np.maximum(0.0, 1.0 - y * (x @ w + b))
    return 0.5 * (float(w @ w) + b * b) + hyper_c * float(margins @ margins)


# ---------------------------------------------------------------------------
# Model file format: magic, u32 version, f64 C, i64 seed, u32 class count,
# u32 dim, length-prefixed UTF-8 labels, row-major f64 weights, f64 biases,
# trailing u32 crc32 of all preceding bytes. Little-endian throughout.


def save_model(model: SvmModel, path: str | os.PathLike) -> None:
    chunks = [
        _MAGIC,
        struct.pack("<I", _FORMAT_VERSION),
        struct.pack("<d", model.hyper_c),
        struct.pack("<q", model.seed),
        struct.pack("<II", len(model.classes), model.dim),
    ]
    for label in model.classes:
        raw = label.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
    chunks.append(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
    chunks.append(np.ascontiguousarray(model.biases, dtype="<f8").tobytes())
    blob = b"".join(chunks)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
    try:
        tmp = str(path) + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise FormatVersionMismatch("model file ends mid-record")
        out = self.blob[self.pos:self.pos + count]
        self.pos += count
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_model(path: str | os.PathLike) -> SvmModel:
    """Read a model file, verifying checksum and format version.

    Raises:
        IoFailure: unreadable path.
        FormatVersionMismatch: wrong magic/version or malformed layout.
        ChecksumMismatch: integrity check fails.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read model from {path}: {exc}") from exc
    if len(blob) < len(_MAGIC) + 8 or blob[:4] != _MAGIC:
        raise FormatVersionMismatch("not a model file (bad magic or too short)")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatch("model file integrity check failed")
    reader = _Reader(blob[:-4])
    reader.take(4)
    version = reader.u32()
    if version != _FORMAT_VERSION:
        raise FormatVersionMismatch(f"unsupported format version {version}")
    hyper_c = struct.unpack("<d", reader.take(8))[0]
    seed = struct.unpack("<q", reader.take(8))[0]
    n_classes = reader.u32()
    dim = reader.u32()
    if n_classes < 2 or n_classes > 1_000_000 or dim < 1 or dim > 1_000_000:
        raise FormatVersionMismatch(f"implausible header: {n_classes} classes, dim {dim}")
    classes = []
    for _ in range(n_classes):
        length = reader.u32()
        try:
            classes.append(reader.take(length).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatVersionMismatch(f"label table is not UTF-8: {exc}") from exc
    weights = np.frombuffer(reader.take(n_classes * dim * 8), dtype="<f8").reshape(n_classes, dim)
    biases = np.frombuffer(reader.take(n_classes * 8), dtype="<f8")
    if reader.pos != len(reader.blob):
        raise FormatVersionMismatch("trailing bytes after model payload")
    return SvmModel(
        classes=tuple(classes),
        weights=weights.copy(),
        biases=biases.copy(),
        hyper_c=hyper_c,
        seed=seed,
    )
