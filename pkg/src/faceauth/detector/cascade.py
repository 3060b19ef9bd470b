"""Cascade detection: pyramid, candidate generation, NMS, calibration.

The cascade runs a proposal net over an image pyramid, prunes candidates
with NMS, refines them through two further nets, and emits calibrated
boxes with five facial landmarks. All network inference goes through a
StageBackend, so the logic here is pure and testable with stubs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from faceauth import imaging
from faceauth.errors import FaceAuthError

if TYPE_CHECKING:
    from faceauth.detector.backends import StageBackend

# Proposal-net geometry: each output-map cell corresponds to a 12x12
# window sliding with stride 2 over the scaled image.
PNET_STRIDE = 2
PNET_CELL = 12

RNET_SIZE = 24
ONET_SIZE = 48


class DetectorError(FaceAuthError):
    """Base class for detection failures."""


class ImageTooSmall(DetectorError):
    """Image smaller than the minimum detectable face size."""


class DegenerateBox(DetectorError):
    """Box violates x2 > x1, y2 > y1."""


class BoundingBox(NamedTuple):
    """Axis-aligned box in pixel coordinates, x2 > x1 and y2 > y1."""

    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)


@dataclass(frozen=True, eq=False)
class Detection:
    """A detected face: box, confidence in [0, 1], five (x, y) landmarks.

    Landmark order: left eye, right eye, nose, left mouth corner, right
    mouth corner, as a (5, 2) float array of absolute pixel coordinates.
    """

    box: BoundingBox
    confidence: float
    landmarks: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise DetectorError(f"confidence {self.confidence} outside [0, 1]")
        if self.landmarks.shape != (5, 2):
            raise DetectorError(f"expected (5, 2) landmarks, got {self.landmarks.shape}")


@dataclass(frozen=True)
class DetectorConfig:
    """Cascade tuning constants, all overridable.

    thresholds: per-stage acceptance probabilities.
    nms_iou: (intra-stage, cross-stage) overlap thresholds.
    """

    min_face_size: int = 20
    scale_factor: float = 0.709
    thresholds: tuple[float, float, float] = (0.6, 0.7, 0.7)
    nms_iou: tuple[float, float] = (0.5, 0.7)

    def __post_init__(self) -> None:
        if not 0.0 < self.scale_factor < 1.0:
            raise ValueError(f"scale_factor must be in (0, 1), got {self.scale_factor}")
        if self.min_face_size < PNET_CELL:
            raise ValueError(f"min_face_size must be >= {PNET_CELL}, got {self.min_face_size}")
        if len(self.thresholds) != 3 or any(not 0.0 < t < 1.0 for t in self.thresholds):
            raise ValueError(f"thresholds must be 3 values in (0, 1), got {self.thresholds}")
        if any(not 0.0 < t <= 1.0 for t in self.nms_iou):
            raise ValueError(f"nms_iou must be in (0, 1], got {self.nms_iou}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def _nms_indices(boxes: np.ndarray, scores: np.ndarray, threshold: float, mode: str) -> list[int]:
    """Greedy suppression on an (n, 4) box array; returns kept row indices
    in order of descending score (ties keep input order)."""
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x2 - x1) * (y2 - y1)
    order = np.argsort(-scores, kind="stable")
    keep: list[int] = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        if rest.size == 0:
            break
        ix = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        iy = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.maximum(0.0, ix) * np.maximum(0.0, iy)
        if mode == "union":
            overlap = inter / (areas[i] + areas[rest] - inter)
        else:
            overlap = inter / np.minimum(areas[i], areas[rest])
        order = rest[overlap <= threshold]
    return keep


def nms(
    scored_boxes: Sequence[tuple[BoundingBox, float]],
    iou_threshold: float,
    mode: str = "union",
) -> list[tuple[BoundingBox, float]]:
    """Greedy non-maximum suppression.

    Repeatedly keeps the highest-confidence box and discards every box
    whose overlap with it exceeds the threshold. Overlap is IoU in
    "union" mode and intersection/min-area in "min" mode. Kept boxes
    come back in descending confidence, ties broken by input order.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    if mode not in ("union", "min"):
        raise ValueError(f"mode must be 'union' or 'min', got {mode!r}")
    if not scored_boxes:
        return []
    arr = np.array([[b.x1, b.y1, b.x2, b.y2] for b, _ in scored_boxes], dtype=np.float64)
    scores = np.array([s for _, s in scored_boxes], dtype=np.float64)
    keep = _nms_indices(arr, scores, iou_threshold, mode)
    return [scored_boxes[i] for i in keep]


def build_pyramid(img: np.ndarray, cfg: DetectorConfig) -> list[float]:
    """Scales at which the proposal net scans the image.

    Starts at cell/min_face_size and shrinks by scale_factor while the
    scaled min-dimension still fits one proposal window. Strictly
    decreasing.

    Raises:
        ImageTooSmall: min(width, height) < min_face_size.
    """
    h, w = np.asarray(img).shape[:2]
    min_dim = min(h, w)
    if min_dim < cfg.min_face_size:
        raise ImageTooSmall(f"min dimension {min_dim} < min_face_size {cfg.min_face_size}")
    scales: list[float] = []
    scale = PNET_CELL / cfg.min_face_size
    while min_dim * scale >= PNET_CELL:
        scales.append(scale)
        scale *= cfg.scale_factor
    return scales


def generate_candidates(
    prob_map: np.ndarray,
    reg_map: np.ndarray,
    scale: float,
    threshold: float,
) -> list[tuple[BoundingBox, float, np.ndarray]]:
    """Map proposal-net output cells above threshold back to image boxes.

    Cell (i, j) covers the window [j*stride, i*stride] to
    [j*stride + cell, i*stride + cell] in the scaled image; dividing by
    the scale returns it to original coordinates. Each candidate carries
    its cell's 4-vector regression offsets.
    """
    prob_map = np.asarray(prob_map, dtype=np.float64)
    reg_map = np.asarray(reg_map, dtype=np.float64)
    if reg_map.shape[:2] != prob_map.shape or reg_map.shape[-1] != 4:
        raise DetectorError(
            f"misaligned maps: prob {prob_map.shape} vs reg {reg_map.shape}"
        )
    out: list[tuple[BoundingBox, float, np.ndarray]] = []
    rows, cols = np.nonzero(prob_map >= threshold)
    for i, j in zip(rows.tolist(), cols.tolist()):
        box = BoundingBox(
            (j * PNET_STRIDE) / scale,
            (i * PNET_STRIDE) / scale,
            (j * PNET_STRIDE + PNET_CELL) / scale,
            (i * PNET_STRIDE + PNET_CELL) / scale,
        )
        out.append((box, float(prob_map[i, j]), reg_map[i, j].copy()))
    return out


def calibrate(box: BoundingBox, reg: Sequence[float]) -> BoundingBox:
    """Apply regression offsets scaled by the box dimensions.

    Raises:
        DegenerateBox: the adjusted box collapses in x or y.
    """
    r1, r2, r3, r4 = (float(v) for v in reg)
    w = box.width
    h = box.height
    out = BoundingBox(box.x1 + r1 * w, box.y1 + r2 * h, box.x2 + r3 * w, box.y2 + r4 * h)
    if out.x2 <= out.x1 or out.y2 <= out.y1:
        raise DegenerateBox(f"calibration collapsed {box} with reg {reg}")
    return out


def square_pad(box: BoundingBox) -> BoundingBox:
    """Expand the shorter side so the box is square with the same center."""
    side = max(box.width, box.height)
    cx, cy = box.center
    half = side / 2.0
    return BoundingBox(cx - half, cy - half, cx + half, cy + half)


def _stage_input(img: np.ndarray) -> np.ndarray:
    # Backends receive pixel values normalized to roughly [-1, 1].
    return (np.asarray(img, dtype=np.float64) - 127.5) / 128.0


@dataclass
class _Candidates:
    """Parallel arrays for one stage's surviving candidates."""

    boxes: np.ndarray  # (n, 4)
    scores: np.ndarray  # (n,)
    regs: np.ndarray  # (n, 4)

    def __len__(self) -> int:
        return self.boxes.shape[0]

    def take(self, idx) -> "_Candidates":
        idx = np.asarray(idx, dtype=np.intp)
        return _Candidates(self.boxes[idx], self.scores[idx], self.regs[idx])


def _as_box(row: np.ndarray) -> BoundingBox:
    return BoundingBox(float(row[0]), float(row[1]), float(row[2]), float(row[3]))


def _calibrate_and_square(cands: _Candidates) -> tuple[np.ndarray, list[int]]:
    """Calibrated, square-padded boxes; candidates whose calibration
    collapses are dropped. Returns the (m, 4) box array and the list of
    surviving input indices."""
    boxes = []
    keep = []
    for k in range(len(cands)):
        try:
            refined = calibrate(_as_box(cands.boxes[k]), cands.regs[k])
        except DegenerateBox:
            continue
        padded = square_pad(refined)
        boxes.append(padded)
        keep.append(k)
    if not boxes:
        return np.zeros((0, 4)), []
    return np.array([[b.x1, b.y1, b.x2, b.y2] for b in boxes], dtype=np.float64), keep


def _crop_batch(img: np.ndarray, boxes: np.ndarray, size: int) -> tuple[np.ndarray, list[int]]:
    """Crop each box (zero-padded) and resize to size x size. Boxes that
    round to empty are dropped; returns the batch and kept indices."""
    crops = []
    keep = []
    for k in range(boxes.shape[0]):
        try:
            patch = imaging.crop(img, boxes[k])
        except imaging.EmptyBox:
            continue
        crops.append(_stage_input(imaging.resize(patch, size, size)))
        keep.append(k)
    if not crops:
        return np.zeros((0, size, size, 3)), []
    return np.stack(crops), keep


def detect_faces(
    img: np.ndarray,
    backend: "StageBackend",
    cfg: DetectorConfig = DetectorConfig(),
) -> list[Detection]:
    """Run the full three-stage cascade over an image.

    Stage 1 scans the pyramid with the proposal net, suppressing
    per-scale then globally; stage 2 re-scores 24x24 crops; stage 3
    re-scores 48x48 crops and adds landmarks. Candidate boxes are
    calibrated by their regression offsets and square-padded between
    stages. Landmarks are normalized offsets within the stage-3 input
    box, converted here to absolute pixels. Detections come back sorted
    by descending confidence, all at or above the final threshold.

    Raises:
        ImageTooSmall: image smaller than cfg.min_face_size.
    """
    img = imaging.validate_image(img)
    h, w = img.shape[:2]
    thr1, thr2, thr3 = cfg.thresholds
    nms_intra, nms_cross = cfg.nms_iou

    # Stage 1: proposal net over the pyramid.
    scales = build_pyramid(img, cfg)
    collected: list[_Candidates] = []
    for scale in scales:
        sw = int(np.ceil(w * scale))
        sh = int(np.ceil(h * scale))
        prob_map, reg_map = backend.run_pnet(_stage_input(imaging.resize(img, sw, sh)))
        cands = generate_candidates(prob_map, reg_map, scale, thr1)
        if not cands:
            continue
        stage = _Candidates(
            np.array([[b.x1, b.y1, b.x2, b.y2] for b, _, _ in cands], dtype=np.float64),
            np.array([s for _, s, _ in cands], dtype=np.float64),
            np.array([r for _, _, r in cands], dtype=np.float64),
        )
        keep = _nms_indices(stage.boxes, stage.scores, nms_intra, "union")
        collected.append(stage.take(keep))
    if not collected:
        return []
    pooled = _Candidates(
        np.concatenate([c.boxes for c in collected]),
        np.concatenate([c.scores for c in collected]),
        np.concatenate([c.regs for c in collected]),
    )
    keep = _nms_indices(pooled.boxes, pooled.scores, nms_cross, "union")
    pooled = pooled.take(keep)
    boxes, kept = _calibrate_and_square(pooled)
    if not kept:
        return []

    # Stage 2: refinement net on 24x24 crops.
    batch, kept = _crop_batch(img, boxes, RNET_SIZE)
    boxes = boxes[kept]
    if batch.shape[0] == 0:
        return []
    probs, regs = backend.run_rnet(batch)
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    regs = np.asarray(regs, dtype=np.float64).reshape(-1, 4)
    passed = np.flatnonzero(probs >= thr2)
    if passed.size == 0:
        return []
    stage2 = _Candidates(boxes[passed], probs[passed], regs[passed])
    keep = _nms_indices(stage2.boxes, stage2.scores, nms_cross, "union")
    stage2 = stage2.take(keep)
    boxes, kept = _calibrate_and_square(stage2)
    if not kept:
        return []

    # Stage 3: output net on 48x48 crops; landmarks are offsets within
    # the pre-calibration (stage-3 input) box.
    batch, kept = _crop_batch(img, boxes, ONET_SIZE)
    boxes = boxes[kept]
    if batch.shape[0] == 0:
        return []
    probs, regs, marks = backend.run_onet(batch)
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    regs = np.asarray(regs, dtype=np.float64).reshape(-1, 4)
    marks = np.asarray(marks, dtype=np.float64).reshape(-1, 10)
    passed = np.flatnonzero(probs >= thr3)
    if passed.size == 0:
        return []

    final_boxes: list[BoundingBox] = []
    final_scores: list[float] = []
    final_marks: list[np.ndarray] = []
    for k in passed.tolist():
        src = _as_box(boxes[k])
        try:
            refined = calibrate(src, regs[k])
        except DegenerateBox:
            continue
        abs_marks = np.column_stack(
            (src.x1 + marks[k, :5] * src.width, src.y1 + marks[k, 5:] * src.height)
        )
        final_boxes.append(refined)
        final_scores.append(float(probs[k]))
        final_marks.append(abs_marks)
    if not final_boxes:
        return []
    arr = np.array([[b.x1, b.y1, b.x2, b.y2] for b in final_boxes], dtype=np.float64)
    keep = _nms_indices(arr, np.array(final_scores), nms_cross, "min")
    return [
        Detection(box=final_boxes[i], confidence=final_scores[i], landmarks=final_marks[i])
        for i in keep
    ]
