"""Single-directory persistent store for users, embeddings, and the model.

Layout under the store root (fully relocatable, only relative content):

    store.json               user records + counters
    embeddings/<label>.npy   per-user embedding rows (n, 512)
    model.bin                trained classifier (versioned binary)

Writes go through one lock and land atomically (tmp + rename). Plaintext
codes never touch this directory; only nonce + ciphertext are stored.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from faceauth.errors import FaceAuthError
from faceauth.service.crypto import EncryptedCode

_STORE_VERSION = 1


class StoreError(FaceAuthError):
    pass


@dataclass(frozen=True)
class UserRecord:
    email: str
    class_label: str
    encrypted_code: EncryptedCode
    enrolled_at: str  # ISO-8601 UTC
    embedding_count: int


class UserStore:
    """Thread-safe user/embedding persistence rooted at one directory."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "embeddings").mkdir(exist_ok=True)
        self._lock = threading.RLock()
        self._users: dict[str, UserRecord] = {}
        self._next_class_index = 0
        self.retrain_pending = False
        self._load()

    @property
    def model_path(self) -> Path:
        return self.root / "model.bin"

    def _state_path(self) -> Path:
        return self.root / "store.json"

    def _load(self) -> None:
        path = self._state_path()
        if not path.exists():
            return
        try:
            state = json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"cannot read store state {path}: {exc}") from exc
        self._next_class_index = state.get("next_class_index", 0)
        self.retrain_pending = state.get("retrain_pending", False)
        for email, raw in state.get("users", {}).items():
            self._users[email] = UserRecord(
                email=email,
                class_label=raw["class_label"],
                encrypted_code=EncryptedCode(
                    nonce=bytes.fromhex(raw["nonce"]),
                    ciphertext=bytes.fromhex(raw["ciphertext"]),
                ),
                enrolled_at=raw["enrolled_at"],
                embedding_count=raw["embedding_count"],
            )

    def _persist_state(self) -> None:
        state = {
            "version": _STORE_VERSION,
            "next_class_index": self._next_class_index,
            "retrain_pending": self.retrain_pending,
            "users": {
                rec.email: {
                    "class_label": rec.class_label,
                    "nonce": rec.encrypted_code.nonce.hex(),
                    "ciphertext": rec.encrypted_code.ciphertext.hex(),
                    "enrolled_at": rec.enrolled_at,
                    "embedding_count": rec.embedding_count,
                }
                for rec in self._users.values()
            },
        }
        tmp = self._state_path().with_suffix(".json.tmp")
        tmp.write_text(json.dumps(state, indent=2, sort_keys=True), "utf-8")
        os.replace(tmp, self._state_path())

    def __contains__(self, email: str) -> bool:
        with self._lock:
            return email in self._users

    def __len__(self) -> int:
        with self._lock:
            return len(self._users)

    def get(self, email: str) -> UserRecord | None:
        with self._lock:
            return self._users.get(email)

    def get_by_label(self, class_label: str) -> UserRecord | None:
        with self._lock:
            for rec in self._users.values():
                if rec.class_label == class_label:
                    return rec
        return None

    def allocate_class_label(self) -> str:
        with self._lock:
            label = f"user-{self._next_class_index:04d}"
            self._next_class_index += 1
            return label

    def add_user(self, record: UserRecord, embeddings: np.ndarray) -> None:
        with self._lock:
            if record.email in self._users:
                raise StoreError(f"user {record.email} already stored")
            emb_path = self.root / "embeddings" / f"{record.class_label}.npy"
            tmp = emb_path.with_suffix(".npy.tmp")
            with open(tmp, "wb") as fh:
                np.save(fh, np.asarray(embeddings, dtype=np.float64))
            os.replace(tmp, emb_path)
            self._users[record.email] = record
            self.retrain_pending = True
            self._persist_state()

    def set_retrain_pending(self, pending: bool) -> None:
        with self._lock:
            self.retrain_pending = pending
            self._persist_state()

    def emails(self) -> list[str]:
        with self._lock:
            return sorted(self._users)

    def all_embeddings(self) -> tuple[np.ndarray, list[str]]:
        """Stacked embeddings of every user with their class labels,
        ordered by class label."""
        with self._lock:
            records = sorted(self._users.values(), key=lambda r: r.class_label)
            blocks = []
            labels: list[str] = []
            for rec in records:
                emb_path = self.root / "embeddings" / f"{rec.class_label}.npy"
                rows = np.load(emb_path)
                blocks.append(rows)
                labels.extend([rec.class_label] * rows.shape[0])
            if not blocks:
                return np.zeros((0, 0)), []
            return np.concatenate(blocks), labels
