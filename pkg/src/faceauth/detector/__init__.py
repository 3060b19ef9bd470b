"""Three-stage cascade face detection with pluggable network backends."""

from faceauth.detector.cascade import (
    PNET_CELL,
    PNET_STRIDE,
    BoundingBox,
    DegenerateBox,
    Detection,
    DetectorConfig,
    DetectorError,
    ImageTooSmall,
    build_pyramid,
    calibrate,
    detect_faces,
    generate_candidates,
    iou,
    nms,
    square_pad,
)
from faceauth.detector.backends import (
    NpzStageBackend,
    StageBackend,
    SyntheticStageBackend,
    pnet_map_size,
)

__all__ = [
    "BoundingBox",
    "Detection",
    "DetectorConfig",
    "DetectorError",
    "DegenerateBox",
    "ImageTooSmall",
    "NpzStageBackend",
    "PNET_CELL",
    "PNET_STRIDE",
    "StageBackend",
    "SyntheticStageBackend",
    "build_pyramid",
    "calibrate",
    "detect_faces",
    "generate_candidates",
    "iou",
    "nms",
    "pnet_map_size",
    "square_pad",
]
