"""The authentication service: enroll, recognize, verify, retrain.

The face pipeline (detect -> crop -> embed) and the classifier run
behind injected backends, so the whole service works with synthetic
detector stubs and the mock embedder as well as with real weights.
"""

from __future__ import annotations

import hmac
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import NamedTuple

import numpy as np

from faceauth import classifier, imaging
from faceauth.classifier import SingleClass, TrainConfig
from faceauth.detector import DetectorConfig, detect_faces, square_pad
from faceauth.detector.backends import StageBackend
from faceauth.embedder import FACE_SIZE, EmbedderBackend, embed
from faceauth.errors import FaceAuthError
from faceauth.service import crypto
from faceauth.service.store import UserRecord, UserStore

MIN_ENROLL_IMAGES = 3


class ServiceError(FaceAuthError):
    pass


class AlreadyEnrolled(ServiceError):
    pass


class TooFewImages(ServiceError):
    pass


class NoFaceFound(ServiceError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class MultipleFaces(ServiceError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NoModel(ServiceError):
    pass


class NotRecognized(ServiceError):
    pass


class UnknownEmail(ServiceError):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    """Runtime knobs for the service.

    master_key_env names the environment variable holding the 32-byte
    master key as hex. reject_margin > 0 turns on margin-based
    rejection: a prediction only counts if (top score - second score)
    reaches the margin.
    """

    listen: str = "127.0.0.1:8000"
    master_key_env: str = "FACEAUTH_MASTER_KEY"
    reject_margin: float = 0.0
    detector: DetectorConfig = DetectorConfig()


def master_key_from_env(cfg: ServiceConfig) -> bytes:
    """Decode the master key from the configured environment variable."""
    raw = os.environ.get(cfg.master_key_env)
    if raw is None:
        raise crypto.BadKeyLength(f"environment variable {cfg.master_key_env} is not set")
    try:
        key = bytes.fromhex(raw.strip())
    except ValueError as exc:
        raise crypto.BadKeyLength(f"{cfg.master_key_env} is not valid hex") from exc
    if len(key) != crypto.KEY_BYTES:
        raise crypto.BadKeyLength(
            f"{cfg.master_key_env} must decode to {crypto.KEY_BYTES} bytes, got {len(key)}"
        )
    return key


class EnrollResult(NamedTuple):
    class_label: str
    code: str  # returned to the caller exactly once, never stored


class RecognizeResult(NamedTuple):
    predicted_code: str


class RetrainResult(NamedTuple):
    classes: tuple[str, ...]
    training_accuracy: float


class AuthService:
    """Long-running authentication service state.

    The live model is swapped atomically by retrain; recognize reads
    whatever model reference is current. Store writes serialize through
    the store's own lock.
    """

    def __init__(
        self,
        store: UserStore,
        detector_backend: StageBackend,
        embedder_backend: EmbedderBackend,
        master_key: bytes,
        config: ServiceConfig = ServiceConfig(),
    ):
        if len(master_key) != crypto.KEY_BYTES:
            raise crypto.BadKeyLength(
                f"master key must be {crypto.KEY_BYTES} bytes, got {len(master_key)}"
            )
        self.store = store
        self.config = config
        self._detector_backend = detector_backend
        self._embedder_backend = embedder_backend
        self._master_key = master_key
        self._model_lock = threading.Lock()
        self._model: classifier.SvmModel | None = None
        if store.model_path.exists():
            self._model = classifier.load_model(store.model_path)

    @property
    def model(self) -> classifier.SvmModel | None:
        return self._model

    def _embed_uri(self, uri: str, index: int | None = None) -> np.ndarray:
        img = imaging.parse_data_uri(uri)
        detections = detect_faces(img, self._detector_backend, self.config.detector)
        where = "image" if index is None else f"image {index}"
        if not detections:
            raise NoFaceFound(f"no face found in {where}", index=index)
        if len(detections) > 1:
            raise MultipleFaces(f"{len(detections)} faces found in {where}", index=index)
        face_box = square_pad(detections[0].box)
        face = imaging.resize(imaging.crop(img, face_box), FACE_SIZE, FACE_SIZE)
        return embed(face, self._embedder_backend)

    def enroll(self, email: str, images: list[str]) -> EnrollResult:
        """Register a user from data-URI face images.

        Embeds every image, persists the embeddings under a fresh class
        label, stores the encrypted secret code, and flags retraining.
        The plaintext code appears only in the return value.

        Raises:
            AlreadyEnrolled, TooFewImages, NoFaceFound, MultipleFaces,
            plus imaging errors for undecodable payloads.
        """
        if email in self.store:
            raise AlreadyEnrolled(f"{email} is already enrolled")
        if len(images) < MIN_ENROLL_IMAGES:
            raise TooFewImages(
                f"need >= {MIN_ENROLL_IMAGES} images, got {len(images)}"
            )
        embeddings = np.stack([self._embed_uri(uri, i) for i, uri in enumerate(images)])
        class_label = self.store.allocate_class_label()
        code = crypto.generate_code()
        record = UserRecord(
            email=email,
            class_label=class_label,
            encrypted_code=crypto.encrypt_code(code, self._master_key),
            enrolled_at=datetime.now(timezone.utc).isoformat(),
            embedding_count=embeddings.shape[0],
        )
        self.store.add_user(record, embeddings)
        return EnrollResult(class_label=class_label, code=code)

    def retrain(self) -> RetrainResult:
        """Train the classifier on all stored embeddings and swap it in.

        Raises:
            SingleClass: fewer than two enrolled users.
        """
        if len(self.store) < 2:
            raise SingleClass(f"need >= 2 enrolled users, have {len(self.store)}")
        x, labels = self.store.all_embeddings()
        model = classifier.train(x, labels, TrainConfig(hyper_c=1.0, seed=0))
        predicted = classifier.predict_many(model, x)
        accuracy = sum(p == t for p, t in zip(predicted, labels)) / len(labels)
        classifier.save_model(model, self.store.model_path)
        with self._model_lock:
            self._model = model
        self.store.set_retrain_pending(False)
        return RetrainResult(classes=model.classes, training_accuracy=float(accuracy))

    def recognize(self, image: str) -> RecognizeResult:
        """Identify the face in a data-URI image and return that user's
        plaintext code (decrypted from the store).

        Raises:
            NoModel, NoFaceFound, MultipleFaces, NotRecognized,
            plus imaging errors.
        """
        model = self._model
        if model is None:
            raise NoModel("no trained model; enroll users and retrain first")
        embedding = self._embed_uri(image)
        scores = classifier.decision_scores(model, embedding)
        top = int(np.argmax(scores))
        if self.config.reject_margin > 0.0 and len(scores) >= 2:
            margin = float(np.sort(scores)[-1] - np.sort(scores)[-2])
            if margin < self.config.reject_margin:
                raise NotRecognized(f"top-score margin {margin:.4f} below threshold")
        record = self.store.get_by_label(model.classes[top])
        if record is None:
            raise NotRecognized(f"predicted label {model.classes[top]} has no user")
        code = crypto.decrypt_code(record.encrypted_code, self._master_key)
        return RecognizeResult(predicted_code=code)

    def verify(self, email: str, code: str) -> bool:
        """Constant-time comparison of the submitted code against the
        user's decrypted stored code.

        Raises:
            UnknownEmail: no such user (mapped to plain failure by the
            HTTP layer to avoid account enumeration).
        """
        record = self.store.get(email)
        if record is None:
            raise UnknownEmail(f"no user {email}")
        stored = crypto.decrypt_code(record.encrypted_code, self._master_key)
        return hmac.compare_digest(stored.encode("utf-8"), code.encode("utf-8"))
