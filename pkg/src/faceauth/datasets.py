"""Labeled embedding datasets shared by the embedder, classifier, and
evaluation code."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from faceauth.errors import FaceAuthError


class DatasetError(FaceAuthError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Embedding matrix plus one label per row.

    embeddings: (n, d) float64 array.
    labels: length-n tuple of identity labels.
    """

    embeddings: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2:
            raise DatasetError(f"embeddings must be 2-d, got shape {emb.shape}")
        if emb.shape[0] != len(self.labels):
            raise DatasetError(
                f"{emb.shape[0]} embeddings but {len(self.labels)} labels"
            )
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def label_counts(self) -> dict[str, int]:
        return dict(Counter(self.labels))

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.embeddings[idx], tuple(self.labels[i] for i in idx))
