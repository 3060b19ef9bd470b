"""Operator workflows: dataset ingestion, experiments, bias audits.

A dataset root is one folder per identity, each holding image files.
Ingestion detects the face in every image, crops it to 160x160, and
writes a crop archive:

    <output>/manifest.json
    <output>/crops/<label>/<stem>.png

Everything here is deterministic given fixed seeds: iteration order is
sorted, reports carry no timestamps, and re-running ingest reproduces
the archive byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from faceauth import classifier, evaluation, imaging
from faceauth.classifier import TrainConfig
from faceauth.datasets import LabeledDataset
from faceauth.detector import DetectorConfig, detect_faces, square_pad
from faceauth.detector.backends import StageBackend
from faceauth.embedder import FACE_SIZE, EmbedderBackend, embed_dataset
from faceauth.errors import FaceAuthError
from faceauth.evaluation import SplitConfig
from faceauth.imaging import EmptyBox, ImagingError

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

STATUS_OK = "ok"
STATUS_NO_FACE = "no_face"
STATUS_MULTI_FACE = "multi_face"
STATUS_DECODE_ERROR = "decode_error"


class WorkflowError(FaceAuthError):
    pass


class EmptyDataset(WorkflowError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    label: str
    file: str
    status: str


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    labels: tuple[str, ...]
    entries: tuple[ManifestEntry, ...]

    @property
    def status_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for entry in self.entries:
            counts[entry.status] = counts.get(entry.status, 0) + 1
        return counts

    @property
    def crop_count(self) -> int:
        # multi_face images still produce a crop (highest confidence wins)
        return sum(1 for e in self.entries if e.status in (STATUS_OK, STATUS_MULTI_FACE))

    @property
    def skip_count(self) -> int:
        return len(self.entries) - self.crop_count

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "labels": list(self.labels),
            "entries": [
                {"label": e.label, "file": e.file, "status": e.status} for e in self.entries
            ],
            "status_counts": self.status_counts,
        }


def _save_png(img: np.ndarray, path: Path) -> None:
    PilImage.fromarray(img, mode="RGB").save(path, format="PNG")


def ingest(
    root: str | Path,
    backend: StageBackend,
    detector_cfg: DetectorConfig = DetectorConfig(),
    output_dir: str | Path = "ingest-out",
) -> DatasetManifest:
    """Build a face-crop archive from a folder-per-identity dataset.

    Per image: detect faces, take the highest-confidence one (an image
    with several faces is still cropped, status multi_face), crop the
    square-padded box, resize to 160x160, write a PNG. Undetectable or
    undecodable images are skipped with their reason recorded.

    Raises:
        EmptyDataset: root has no identity folder with images.
    """
    root = Path(root)
    output_dir = Path(output_dir)
    crops_dir = output_dir / "crops"
    crops_dir.mkdir(parents=True, exist_ok=True)

    labels = sorted(d.name for d in root.iterdir() if d.is_dir())
    entries: list[ManifestEntry] = []
    for label in labels:
        files = sorted(
            p for p in (root / label).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
        )
        label_dir = crops_dir / label
        for path in files:
            status = _ingest_one(path, label_dir, backend, detector_cfg)
            entries.append(ManifestEntry(label=label, file=path.name, status=status))
    if not entries:
        raise EmptyDataset(f"no identity folders with images under {root}")
    manifest = DatasetManifest(root=str(root), labels=tuple(labels), entries=tuple(entries))
    (output_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True), "utf-8"
    )
    return manifest


def _ingest_one(
    path: Path, label_dir: Path, backend: StageBackend, cfg: DetectorConfig
) -> str:
    try:
        img = imaging.decode_image_bytes(path.read_bytes())
    except (ImagingError, OSError):
        return STATUS_DECODE_ERROR
    try:
        detections = detect_faces(img, backend, cfg)
    except FaceAuthError:
        return STATUS_NO_FACE
    if not detections:
        return STATUS_NO_FACE
    best = detections[0]  # already sorted by confidence
    try:
        face = imaging.resize(imaging.crop(img, square_pad(best.box)), FACE_SIZE, FACE_SIZE)
    except EmptyBox:
        return STATUS_NO_FACE
    label_dir.mkdir(parents=True, exist_ok=True)
    _save_png(face, label_dir / f"{path.stem}.png")
    return STATUS_OK if len(detections) == 1 else STATUS_MULTI_FACE


def load_archive(archive_dir: str | Path) -> tuple[list[np.ndarray], list[str]]:
    """Read a crop archive back into (faces, labels), sorted order."""
    crops_dir = Path(archive_dir) / "crops"
    if not crops_dir.is_dir():
        raise WorkflowError(f"{archive_dir} has no crops/ directory")
    faces: list[np.ndarray] = []
    labels: list[str] = []
    for label_dir in sorted(p for p in crops_dir.iterdir() if p.is_dir()):
        for path in sorted(label_dir.glob("*.png")):
            faces.append(imaging.decode_image_bytes(path.read_bytes()))
            labels.append(label_dir.name)
    if not faces:
        raise EmptyDataset(f"no crops under {crops_dir}")
    return faces, labels


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    report: evaluation.MetricsReport
    cv: evaluation.CrossValidationResult
    train_size: int
    test_size: int


def run_experiment(
    archive_dir: str | Path,
    embedder_backend: EmbedderBackend,
    split_cfg: SplitConfig = SplitConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    output_dir: str | Path = "experiment-out",
) -> ExperimentResult:
    """Embed an archive, train/test split it, and write the full report.

    Output files: metrics.txt, metrics.json, confusion.csv (row-
    normalized), cv.json (per-fold accuracies over the whole embedded
    dataset).
    """
    faces, labels = load_archive(archive_dir)
    if len(set(labels)) < 2:
        raise WorkflowError("archive needs >= 2 identities")
    data = embed_dataset(faces, labels, embedder_backend)

    train_part, test_part = evaluation.stratified_split(data, split_cfg)
    model = classifier.train(train_part.embeddings, list(train_part.labels), train_cfg)
    predicted = classifier.predict_many(model, test_part.embeddings)
    report = evaluation.compute_metrics(list(test_part.labels), predicted)
    # k-fold CV runs on the full embedded dataset so the configured fold
    # count works whenever every class has >= folds samples overall.
    cv = evaluation.cross_validate(data, split_cfg, train_cfg)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.txt").write_text(report.to_text(), "utf-8")
    (out / "metrics.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True), "utf-8"
    )
    normalized = evaluation.normalize_confusion(report.confusion)
    (out / "confusion.csv").write_text(
        evaluation.confusion_to_csv(report.classes, normalized), "utf-8"
    )
    (out / "cv.json").write_text(json.dumps(cv.to_dict(), indent=2, sort_keys=True), "utf-8")
    return ExperimentResult(
        report=report, cv=cv, train_size=len(train_part), test_size=len(test_part)
    )


def run_bias_audit(
    archive_a: str | Path,
    archive_b: str | Path,
    embedder_backend: EmbedderBackend,
    split_cfg: SplitConfig = SplitConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    output_dir: str | Path = "bias-out",
) -> evaluation.BiasReport:
    """Paired experiment over two archives with identical procedure and
    seed; writes bias_report.txt and bias_report.json."""
    faces_a, labels_a = load_archive(archive_a)
    faces_b, labels_b = load_archive(archive_b)
    data_a = embed_dataset(faces_a, labels_a, embedder_backend)
    data_b = embed_dataset(faces_b, labels_b, embedder_backend)
    report = evaluation.bias_report(
        data_a,
        data_b,
        split_cfg,
        train_cfg,
        name_a=Path(archive_a).name or "dataset_a",
        name_b=Path(archive_b).name or "dataset_b",
    )
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bias_report.txt").write_text(report.to_text(), "utf-8")
    (out / "bias_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True), "utf-8"
    )
    return report
