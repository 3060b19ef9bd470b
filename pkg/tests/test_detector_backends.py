"""Contract tests for the numpy .npz stage backend, using random weights
generated to the documented schema."""

import numpy as np
import pytest

from faceauth.detector import (
    DetectorConfig,
    DetectorError,
    NpzStageBackend,
    detect_faces,
    pnet_map_size,
)


def _conv_block(rng, kh, kw, cin, cout, scale=0.2):
    return {
        "weight": rng.standard_normal((kh, kw, cin, cout)) * scale,
        "bias": rng.standard_normal(cout) * scale,
        "prelu": rng.uniform(0.1, 0.4, size=cout),
    }


def _head(rng, cin, cout, scale=0.2):
    return {
        "weight": rng.standard_normal((cin, cout)) * scale,
        "bias": rng.standard_normal(cout) * scale,
    }


def save_random_stage_weights(directory, seed=0):
    rng = np.random.default_rng(seed)

    def flat(prefix, block):
        return {f"{prefix}.{k}": v for k, v in block.items()}

    pnet = {}
    pnet.update(flat("conv1", _conv_block(rng, 3, 3, 3, 10)))
    pnet.update(flat("conv2", _conv_block(rng, 3, 3, 10, 16)))
    pnet.update(flat("conv3", _conv_block(rng, 3, 3, 16, 32)))
    pnet.update(flat("cls", _head(rng, 1, 2)))
    pnet["cls.weight"] = rng.standard_normal((1, 1, 32, 2)) * 0.2
    pnet.update(flat("reg", _head(rng, 1, 4)))
    pnet["reg.weight"] = rng.standard_normal((1, 1, 32, 4)) * 0.2

    rnet = {}
    rnet.update(flat("conv1", _conv_block(rng, 3, 3, 3, 28)))
    rnet.update(flat("conv2", _conv_block(rng, 3, 3, 28, 48)))
    rnet.update(flat("conv3", _conv_block(rng, 2, 2, 48, 64)))
    rnet.update(flat("fc1", _conv_block(rng, 1, 1, 1, 1)))
    rnet["fc1.weight"] = rng.standard_normal((576, 128)) * 0.05
    rnet["fc1.bias"] = rng.standard_normal(128) * 0.05
    rnet["fc1.prelu"] = rng.uniform(0.1, 0.4, size=128)
    rnet.update(flat("cls", _head(rng, 128, 2, scale=0.05)))
    rnet.update(flat("reg", _head(rng, 128, 4, scale=0.05)))

    onet = {}
    onet.update(flat("conv1", _conv_block(rng, 3, 3, 3, 32)))
    onet.update(flat("conv2", _conv_block(rng, 3, 3, 32, 64)))
    onet.update(flat("conv3", _conv_block(rng, 3, 3, 64, 64)))
    onet.update(flat("conv4", _conv_block(rng, 2, 2, 64, 128)))
    onet["fc1.weight"] = rng.standard_normal((1152, 256)) * 0.05
    onet["fc1.bias"] = rng.standard_normal(256) * 0.05
    onet["fc1.prelu"] = rng.uniform(0.1, 0.4, size=256)
    onet.update(flat("cls", _head(rng, 256, 2, scale=0.05)))
    onet.update(flat("reg", _head(rng, 256, 4, scale=0.05)))
    onet.update(flat("lmk", _head(rng, 256, 10, scale=0.05)))

    paths = {}
    for name, arrays in (("pnet", pnet), ("rnet", rnet), ("onet", onet)):
        path = directory / f"{name}.npz"
        np.savez(path, **arrays)
        paths[name] = path
    return paths


@pytest.fixture(scope="module")
def backend(tmp_path_factory):
    directory = tmp_path_factory.mktemp("weights")
    paths = save_random_stage_weights(directory)
    return NpzStageBackend(paths["pnet"], paths["rnet"], paths["onet"])


class TestNpzStageBackend:
    def test_pnet_smallest_input_gives_one_cell(self, backend):
        rng = np.random.default_rng(0)
        prob, reg = backend.run_pnet(rng.standard_normal((12, 12, 3)))
        assert prob.shape == (1, 1)
        assert reg.shape == (1, 1, 4)

    @pytest.mark.parametrize("size", [(12, 12), (24, 30), (47, 60)])
    def test_pnet_fully_convolutional_shape(self, backend, size):
        rng = np.random.default_rng(1)
        h, w = size
        prob, reg = backend.run_pnet(rng.standard_normal((h, w, 3)))
        assert prob.shape == pnet_map_size(h, w)
        assert reg.shape == pnet_map_size(h, w) + (4,)

    def test_probabilities_in_unit_interval(self, backend):
        rng = np.random.default_rng(2)
        prob, _ = backend.run_pnet(rng.standard_normal((30, 30, 3)))
        assert np.all(prob >= 0.0) and np.all(prob <= 1.0)
        probs, regs = backend.run_rnet(rng.standard_normal((4, 24, 24, 3)))
        assert probs.shape == (4,) and regs.shape == (4, 4)
        assert np.all((probs >= 0.0) & (probs <= 1.0))
        probs, regs, marks = backend.run_onet(rng.standard_normal((3, 48, 48, 3)))
        assert probs.shape == (3,) and regs.shape == (3, 4) and marks.shape == (3, 10)
        assert np.all((probs >= 0.0) & (probs <= 1.0))

    def test_deterministic(self, backend):
        rng = np.random.default_rng(3)
        batch = rng.standard_normal((2, 24, 24, 3))
        first = backend.run_rnet(batch)
        second = backend.run_rnet(batch)
        np.testing.assert_array_equal(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])

    def test_full_cascade_runs(self, backend):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, size=(60, 60, 3), dtype=np.uint8)
        cfg = DetectorConfig()
        detections = detect_faces(img, backend, cfg)
        for det in detections:
            assert det.confidence >= cfg.thresholds[2]
            assert det.landmarks.shape == (5, 2)

    def test_missing_key_raises(self, tmp_path):
        np.savez(tmp_path / "bad.npz", **{"conv1.weight": np.zeros((3, 3, 3, 10))})
        good = tmp_path / "good"
        good.mkdir()
        paths = save_random_stage_weights(good)
        broken = NpzStageBackend(tmp_path / "bad.npz", paths["rnet"], paths["onet"])
        with pytest.raises(DetectorError):
            broken.run_pnet(np.zeros((12, 12, 3)))

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(DetectorError):
            NpzStageBackend(tmp_path / "nope.npz", tmp_path / "nope.npz", tmp_path / "nope.npz")
