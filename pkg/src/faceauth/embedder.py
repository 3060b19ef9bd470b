"""Face embeddings: 160x160 RGB crop -> unit-norm 512-d vector.

Backends provide the raw forward pass; this module owns prewhitening and
L2 normalization, so every embedding leaving here has norm 1 regardless
of the backend.
"""

from __future__ import annotations

import math
import os
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from faceauth import imaging
from faceauth.datasets import LabeledDataset
from faceauth.errors import FaceAuthError

EMBEDDING_DIM = 512
FACE_SIZE = 160
_FLAT_INPUT = FACE_SIZE * FACE_SIZE * 3


class EmbedderError(FaceAuthError):
    pass


class WrongShape(EmbedderError):
    """Input is not a 160x160x3 image."""


class BackendFailure(EmbedderError):
    """Backend raised, or returned an unusable vector."""


@runtime_checkable
class EmbedderBackend(Protocol):
    """Raw embedding network.

    forward() receives the prewhitened (160, 160, 3) float tensor and
    returns 512 raw values. ``descriptor`` names the model and its
    training data.
    """

    descriptor: str

    def forward(self, tensor: np.ndarray) -> np.ndarray: ...


def embed(face: np.ndarray, backend: EmbedderBackend) -> np.ndarray:
    """Embed one face crop: prewhiten -> backend forward -> L2 normalize.

    Raises:
        WrongShape: face is not (160, 160, 3).
        BackendFailure: backend raised or produced a non-finite,
            wrong-length, or zero vector.
    """
    arr = np.asarray(face)
    if arr.shape != (FACE_SIZE, FACE_SIZE, 3):
        raise WrongShape(f"expected ({FACE_SIZE}, {FACE_SIZE}, 3), got {arr.shape}")
    tensor = imaging.prewhiten(arr)
    try:
        raw = np.asarray(backend.forward(tensor), dtype=np.float64).reshape(-1)
    except (FaceAuthError, TypeError, ValueError, RuntimeError) as exc:
        raise BackendFailure(f"backend forward failed: {exc}") from exc
    if raw.shape != (EMBEDDING_DIM,):
        raise BackendFailure(f"backend returned {raw.shape}, expected ({EMBEDDING_DIM},)")
    if not np.all(np.isfinite(raw)):
        raise BackendFailure("backend returned non-finite values")
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise BackendFailure("backend returned a zero vector")
    return raw / norm


def embed_dataset(
    faces: Sequence[np.ndarray],
    labels: Sequence[str],
    backend: EmbedderBackend,
) -> LabeledDataset:
    """Embed a labeled list of face crops, preserving order.

    Embedding errors are re-raised with the failing item index prefixed.
    """
    if len(faces) != len(labels):
        raise EmbedderError(f"{len(faces)} faces but {len(labels)} labels")
    rows = np.zeros((len(faces), EMBEDDING_DIM))
    for i, face in enumerate(faces):
        try:
            rows[i] = embed(face, backend)
        except EmbedderError as exc:
            raise type(exc)(f"item {i}: {exc}") from exc
    return LabeledDataset(rows, tuple(labels))


# ---------------------------------------------------------------------------
# Backends

# Projection matrices are ~150 MB each; share them across backend
# instances with the same seed.
_PROJECTION_CACHE: dict[int, np.ndarray] = {}
_PROJECTION_CACHE_LIMIT = 4


def _projection(seed: int) -> np.ndarray:
    if seed not in _PROJECTION_CACHE:
        if len(_PROJECTION_CACHE) >= _PROJECTION_CACHE_LIMIT:
            _PROJECTION_CACHE.pop(next(iter(_PROJECTION_CACHE)))
        rng = np.random.default_rng(seed)
        matrix = rng.standard_normal((EMBEDDING_DIM, _FLAT_INPUT), dtype=np.float32)
        matrix /= math.sqrt(_FLAT_INPUT)
        _PROJECTION_CACHE[seed] = matrix
    return _PROJECTION_CACHE[seed]


class MockEmbedderBackend:
    """Deterministic linear backend: a seeded random projection matrix
    (512 x 76800) applied to the flattened input tensor. Same seed, same
    projection; distinct inputs map to distinct outputs."""

    def __init__(self, seed: int):
        self.seed = seed
        self.descriptor = f"mock-projection-{seed} (synthetic)"

    def forward(self, tensor: np.ndarray) -> np.ndarray:
        flat = np.asarray(tensor, dtype=np.float32).reshape(-1)
        if flat.shape != (_FLAT_INPUT,):
            raise BackendFailure(f"expected {_FLAT_INPUT} values, got {flat.shape}")
        return (_projection(self.seed) @ flat).astype(np.float64)


def mock_backend(seed: int) -> MockEmbedderBackend:
    """Deterministic mock backend for running the stack without the
    pretrained model file."""
    return MockEmbedderBackend(seed)


class KerasEmbedderBackend:
    """Loads a pretrained Keras model (.h5 or SavedModel directory) and
    runs it on single faces. Requires tensorflow, imported lazily."""

    def __init__(
        self,
        model_path: str | os.PathLike,
        descriptor: str = "20180402-114759 (VGGFace2, Inception ResNet v1)",
    ):
        try:
            from tensorflow import keras
        except ImportError as exc:
            raise BackendFailure(
                "tensorflow is required for KerasEmbedderBackend; install the 'keras' extra"
            ) from exc
        try:
            self._model = keras.models.load_model(model_path, compile=False)
        except (OSError, ValueError) as exc:
            raise BackendFailure(f"cannot load model from {model_path}: {exc}") from exc
        self.descriptor = descriptor

    def forward(self, tensor: np.ndarray) -> np.ndarray:
        batch = np.asarray(tensor, dtype=np.float32)[None, ...]
        out = self._model(batch, training=False)
        return np.asarray(out).reshape(-1).astype(np.float64)
