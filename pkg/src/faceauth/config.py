"""JSON config file handling for the CLI and service.

Schema (all sections optional; defaults shown):

    {
      "detector": {
        "min_face_size": 20, "scale_factor": 0.709,
        "thresholds": [0.6, 0.7, 0.7], "nms_iou": [0.5, 0.7],
        "backend": {"kind": "synthetic", "face_fraction": 0.6}
          or {"kind": "npz", "pnet": "...", "rnet": "...", "onet": "..."}
      },
      "embedder": {"kind": "mock", "seed": 0}
          or {"kind": "keras", "path": "model.h5"},
      "train": {"hyper_c": 1.0, "seed": 0, "max_epochs": 1000,
                "tolerance": 1e-4},
      "split": {"test_fraction": 0.3, "folds": 10, "seed": 0},
      "service": {"listen": "127.0.0.1:8000",
                  "master_key_env": "FACEAUTH_MASTER_KEY",
                  "reject_margin": 0.0}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from faceauth.classifier import TrainConfig
from faceauth.detector import DetectorConfig
from faceauth.detector.backends import NpzStageBackend, StageBackend, SyntheticStageBackend
from faceauth.embedder import EmbedderBackend, KerasEmbedderBackend, mock_backend
from faceauth.errors import FaceAuthError
from faceauth.evaluation import SplitConfig
from faceauth.service.core import ServiceConfig


class ConfigError(FaceAuthError):
    pass


@dataclass(frozen=True)
class AppConfig:
    detector: DetectorConfig = DetectorConfig()
    split: SplitConfig = SplitConfig()
    train: TrainConfig = TrainConfig()
    service: ServiceConfig = ServiceConfig()
    detector_backend_spec: dict = field(default_factory=lambda: {"kind": "synthetic"})
    embedder_backend_spec: dict = field(default_factory=lambda: {"kind": "mock", "seed": 0})

    def build_detector_backend(self) -> StageBackend:
        spec = self.detector_backend_spec
        kind = spec.get("kind", "synthetic")
        if kind == "synthetic":
            return SyntheticStageBackend(face_fraction=spec.get("face_fraction", 0.6))
        if kind == "npz":
            try:
                return NpzStageBackend(spec["pnet"], spec["rnet"], spec["onet"])
            except KeyError as exc:
                raise ConfigError(f"npz detector backend needs {exc} path") from exc
        raise ConfigError(f"unknown detector backend kind {kind!r}")

    def build_embedder_backend(self) -> EmbedderBackend:
        spec = self.embedder_backend_spec
        kind = spec.get("kind", "mock")
        if kind == "mock":
            return mock_backend(int(spec.get("seed", 0)))
        if kind == "keras":
            try:
                return KerasEmbedderBackend(spec["path"])
            except KeyError as exc:
                raise ConfigError(f"keras embedder backend needs {exc} path") from exc
        raise ConfigError(f"unknown embedder backend kind {kind!r}")


def _build(section: dict, cls, name: str):
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name} config: {exc}") from exc


def load_config(path: str | Path | None = None, seed: int | None = None) -> AppConfig:
    """Load an AppConfig from a JSON file; missing file/sections fall
    back to defaults. A seed override rewires the train/split/mock-
    embedder seeds in one place."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    det_section = dict(raw.get("detector", {}))
    det_backend = det_section.pop("backend", {"kind": "synthetic"})
    if "thresholds" in det_section:
        det_section["thresholds"] = tuple(det_section["thresholds"])
    if "nms_iou" in det_section:
        det_section["nms_iou"] = tuple(det_section["nms_iou"])
    emb_backend = dict(raw.get("embedder", {"kind": "mock", "seed": 0}))
    train_section = dict(raw.get("train", {}))
    split_section = dict(raw.get("split", {}))
    service_section = dict(raw.get("service", {}))

    if seed is not None:
        train_section["seed"] = seed
        split_section["seed"] = seed
        if emb_backend.get("kind", "mock") == "mock":
            emb_backend["seed"] = seed

    detector_cfg = _build(det_section, DetectorConfig, "detector")
    return AppConfig(
        detector=detector_cfg,
        split=_build(split_section, SplitConfig, "split"),
        train=_build(train_section, TrainConfig, "train"),
        service=_build({**service_section, "detector": detector_cfg}, ServiceConfig, "service"),
        detector_backend_spec=det_backend,
        embedder_backend_spec=emb_backend,
    )
