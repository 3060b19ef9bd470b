import numpy as np
import pytest

from faceauth.detector import (
    DetectorConfig,
    ImageTooSmall,
    SyntheticStageBackend,
    detect_faces,
)
from stubs import PlantedFaceBackend, ZeroBackend


@pytest.fixture
def gray_image():
    return np.full((80, 80, 3), 120, dtype=np.uint8)


class TestDetectFaces:
    def test_zero_backend_detects_nothing(self, gray_image):
        assert detect_faces(gray_image, ZeroBackend()) == []

    def test_too_small_image_propagates(self):
        img = np.full((16, 16, 3), 90, dtype=np.uint8)
        with pytest.raises(ImageTooSmall):
            detect_faces(img, ZeroBackend(), DetectorConfig(min_face_size=20))

    def test_single_planted_face_recovered(self, gray_image):
        # fire scale 0.6 makes the scaled width 80*0.6 = 48 integral, so
        # the stub's scale inference is exact and the planted geometry
        # survives the cascade unchanged.
        target = (8.0, 8.0, 28.0, 28.0)
        backend = PlantedFaceBackend(80, [target], fire_scale=0.6)
        detections = detect_faces(gray_image, backend)
        assert len(detections) == 1
        det = detections[0]
        cx, cy = det.box.center
        assert abs(cx - 18.0) <= 2.0
        assert abs(cy - 18.0) <= 2.0
        assert det.confidence == pytest.approx(0.95)

    def test_two_disjoint_planted_faces(self, gray_image):
        targets = [(8.0, 8.0, 28.0, 28.0), (48.0, 48.0, 68.0, 68.0)]
        backend = PlantedFaceBackend(80, targets, fire_scale=0.6)
        detections = detect_faces(gray_image, backend)
        assert len(detections) == 2
        centers = sorted(det.box.center for det in detections)
        assert centers[0] == pytest.approx((18.0, 18.0), abs=2.0)
        assert centers[1] == pytest.approx((58.0, 58.0), abs=2.0)

    def test_confidence_never_below_final_threshold(self, gray_image):
        cfg = DetectorConfig()
        backend = PlantedFaceBackend(80, [(8, 8, 28, 28)], fire_scale=0.6, onet_prob=0.5)
        assert detect_faces(gray_image, backend, cfg) == []
        backend = PlantedFaceBackend(80, [(8, 8, 28, 28)], fire_scale=0.6, onet_prob=0.7)
        for det in detect_faces(gray_image, backend, cfg):
            assert det.confidence >= cfg.thresholds[2]

    def test_detections_sorted_by_confidence(self, gray_image):
        targets = [(8.0, 8.0, 28.0, 28.0), (48.0, 48.0, 68.0, 68.0)]
        backend = PlantedFaceBackend(80, targets, fire_scale=0.6)
        confidences = [d.confidence for d in detect_faces(gray_image, backend)]
        assert confidences == sorted(confidences, reverse=True)

    def test_landmarks_inside_planted_box(self, gray_image):
        target = (8.0, 8.0, 28.0, 28.0)
        backend = PlantedFaceBackend(80, [target], fire_scale=0.6)
        det, = detect_faces(gray_image, backend)
        assert det.landmarks.shape == (5, 2)
        assert np.all(det.landmarks[:, 0] >= target[0] - 1e-6)
        assert np.all(det.landmarks[:, 0] <= target[2] + 1e-6)
        assert np.all(det.landmarks[:, 1] >= target[1] - 1e-6)
        assert np.all(det.landmarks[:, 1] <= target[3] + 1e-6)


class TestSyntheticBackend:
    def test_one_central_detection(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(160, 160, 3), dtype=np.uint8)
        detections = detect_faces(img, SyntheticStageBackend(face_fraction=0.6))
        assert len(detections) == 1
        cx, cy = detections[0].box.center
        # scale-inference rounding shifts the center by a few pixels at
        # coarse pyramid levels; it stays well inside the frame center
        assert abs(cx - 80.0) <= 8.0
        assert abs(cy - 80.0) <= 8.0

    def test_deterministic_across_calls(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(120, 100, 3), dtype=np.uint8)
        backend = SyntheticStageBackend()
        first = detect_faces(img, backend)
        second = detect_faces(img, backend)
        assert len(first) == len(second) == 1
        assert first[0].box == second[0].box
