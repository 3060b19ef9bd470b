"""Stage network backends for the detection cascade.

A backend runs the three stage networks. Inputs are float tensors
normalized to (pixel - 127.5) / 128:

  run_pnet: (h, w, 3) scaled image -> prob map (mh, mw) in [0, 1] and
            regression map (mh, mw, 4). Map cell (i, j) corresponds to
            the 12x12 window at (j*2, i*2) in the input.
  run_rnet: (n, 24, 24, 3) crop batch -> probs (n,), regs (n, 4).
  run_onet: (n, 48, 48, 3) crop batch -> probs (n,), regs (n, 4),
            landmarks (n, 10) as normalized offsets within the crop box
            (x1..x5 then y1..y5).

NpzStageBackend loads real weights from three ``.npz`` archives, one per
stage, and evaluates them with a pure-numpy forward pass. Expected keys
(all float arrays; conv weights are (kh, kw, in, out), fc weights
(in, out), prelu slopes per channel):

  pnet: conv1..conv3 {weight,bias,prelu}, cls.{weight,bias},
        reg.{weight,bias} with cls/reg as 1x1 convs.
  rnet: conv1..conv3 {weight,bias,prelu}, fc1.{weight,bias,prelu},
        cls.{weight,bias}, reg.{weight,bias}.
  onet: conv1..conv4 {weight,bias,prelu}, fc1.{weight,bias,prelu},
        cls.{weight,bias}, reg.{weight,bias}, lmk.{weight,bias}.
"""

from __future__ import annotations

import os
from typing import Protocol, runtime_checkable

import numpy as np

from faceauth.detector.cascade import PNET_CELL, PNET_STRIDE, DetectorError


@runtime_checkable
class StageBackend(Protocol):
    """Inference provider for the three cascade stages."""

    def run_pnet(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def run_rnet(self, crops: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def run_onet(self, crops: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]: ...


# ---------------------------------------------------------------------------
# Synthetic backend


_LANDMARK_OFFSETS = np.array(
    [0.3, 0.7, 0.5, 0.32, 0.68, 0.36, 0.36, 0.58, 0.78, 0.78], dtype=np.float64
)


class SyntheticStageBackend:
    """Deterministic content-blind backend: every image "contains" one
    face filling the central fraction of the frame.

    The proposal stage scores each window by its overlap with that
    central square and emits regression offsets that snap the window
    exactly onto it; refinement stages approve everything. Useful for
    demos and for running the full service without model files.
    """

    def __init__(self, face_fraction: float = 0.6, approve_confidence: float = 0.99):
        if not 0.0 < face_fraction <= 1.0:
            raise ValueError(f"face_fraction must be in (0, 1], got {face_fraction}")
        self.face_fraction = face_fraction
        self.approve_confidence = approve_confidence

    def run_pnet(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h, w = image.shape[:2]
        mh = max((h - PNET_CELL) // PNET_STRIDE + 1, 0)
        mw = max((w - PNET_CELL) // PNET_STRIDE + 1, 0)
        prob = np.zeros((mh, mw))
        reg = np.zeros((mh, mw, 4))
        if mh == 0 or mw == 0:
            return prob, reg
        side = self.face_fraction * min(h, w)
        tx1, ty1 = (w - side) / 2.0, (h - side) / 2.0
        tx2, ty2 = tx1 + side, ty1 + side

        wx1 = np.arange(mw) * float(PNET_STRIDE)
        wy1 = np.arange(mh) * float(PNET_STRIDE)
        ix = np.maximum(0.0, np.minimum(wx1 + PNET_CELL, tx2) - np.maximum(wx1, tx1))
        iy = np.maximum(0.0, np.minimum(wy1 + PNET_CELL, ty2) - np.maximum(wy1, ty1))
        inter = np.outer(iy, ix)
        union = PNET_CELL * PNET_CELL + side * side - inter
        prob = np.sqrt(inter / union)
        reg[:, :, 0] = ((tx1 - wx1) / PNET_CELL)[None, :]
        reg[:, :, 1] = ((ty1 - wy1) / PNET_CELL)[:, None]
        reg[:, :, 2] = ((tx2 - (wx1 + PNET_CELL)) / PNET_CELL)[None, :]
        reg[:, :, 3] = ((ty2 - (wy1 + PNET_CELL)) / PNET_CELL)[:, None]
        return prob, reg

    def run_rnet(self, crops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = crops.shape[0]
        return np.full(n, self.approve_confidence), np.zeros((n, 4))

    def run_onet(self, crops: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = crops.shape[0]
        return (
            np.full(n, self.approve_confidence),
            np.zeros((n, 4)),
            np.tile(_LANDMARK_OFFSETS, (n, 1)),
        )


# ---------------------------------------------------------------------------
# Numpy forward pass over .npz weights


def _conv(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid convolution, stride 1. x is (..., h, w, c), weight
    (kh, kw, c, out)."""
    kh, kw = weight.shape[:2]
    oh = x.shape[-3] - kh + 1
    ow = x.shape[-2] - kw + 1
    if oh < 1 or ow < 1:
        raise DetectorError(f"input {x.shape} too small for {kh}x{kw} convolution")
    out = np.zeros(x.shape[:-3] + (oh, ow, weight.shape[3]))
    for di in range(kh):
        for dj in range(kw):
            out += x[..., di:di + oh, dj:dj + ow, :] @ weight[di, dj]
    return out + bias


def _maxpool(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Max pooling with ceil-mode output size (tail padded)."""
    h, w = x.shape[-3], x.shape[-2]
    oh = int(np.ceil((h - kernel) / stride)) + 1
    ow = int(np.ceil((w - kernel) / stride)) + 1
    ph = (oh - 1) * stride + kernel
    pw = (ow - 1) * stride + kernel
    if ph > h or pw > w:
        pad = [(0, 0)] * (x.ndim - 3) + [(0, ph - h), (0, pw - w), (0, 0)]
        x = np.pad(x, pad, constant_values=-np.inf)
    out = np.full(x.shape[:-3] + (oh, ow, x.shape[-1]), -np.inf)
    for di in range(kernel):
        for dj in range(kernel):
            np.maximum(
                out,
                x[..., di:di + stride * oh:stride, dj:dj + stride * ow:stride, :],
                out=out,
            )
    return out


def _prelu(x: np.ndarray, slope: np.ndarray) -> np.ndarray:
    return np.where(x >= 0.0, x, slope * x)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class _StageWeights:
    def __init__(self, path: str | os.PathLike, stage: str):
        try:
            with np.load(path) as archive:
                self._arrays = {k: np.asarray(archive[k], dtype=np.float64) for k in archive.files}
        except (OSError, ValueError) as exc:
            raise DetectorError(f"cannot load {stage} weights from {path}: {exc}") from exc
        self.stage = stage
        self.path = str(path)

    def __getitem__(self, key: str) -> np.ndarray:
        try:
            return self._arrays[key]
        except KeyError:
            raise DetectorError(f"{self.stage} weights {self.path} missing key {key!r}") from None

    def conv(self, x: np.ndarray, name: str) -> np.ndarray:
        return _prelu(_conv(x, self[f"{name}.weight"], self[f"{name}.bias"]), self[f"{name}.prelu"])

    def fc(self, x: np.ndarray, name: str) -> np.ndarray:
        return x @ self[f"{name}.weight"] + self[f"{name}.bias"]


def pnet_map_size(height: int, width: int) -> tuple[int, int]:
    """Output map dims of the proposal net for a given input size."""

    def one(n: int) -> int:
        n = n - 2  # conv1
        n = int(np.ceil((n - 2) / 2)) + 1  # pool 2, stride 2, ceil
        return n - 4  # conv2 + conv3

    return one(height), one(width)


class NpzStageBackend:
    """Real stage networks evaluated in numpy from .npz weight files."""

    def __init__(
        self,
        pnet_path: str | os.PathLike,
        rnet_path: str | os.PathLike,
        onet_path: str | os.PathLike,
    ):
        self._pnet = _StageWeights(pnet_path, "pnet")
        self._rnet = _StageWeights(rnet_path, "rnet")
        self._onet = _StageWeights(onet_path, "onet")

    def run_pnet(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self._pnet
        t = _maxpool(p.conv(np.asarray(image, dtype=np.float64), "conv1"), 2, 2)
        t = p.conv(t, "conv2")
        t = p.conv(t, "conv3")
        prob = _softmax(_conv(t, p["cls.weight"], p["cls.bias"]))[..., 1]
        reg = _conv(t, p["reg.weight"], p["reg.bias"])
        return prob, reg

    def run_rnet(self, crops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = self._rnet
        t = np.asarray(crops, dtype=np.float64)
        t = _maxpool(r.conv(t, "conv1"), 3, 2)
        t = _maxpool(r.conv(t, "conv2"), 3, 2)
        t = r.conv(t, "conv3")
        flat = t.reshape(t.shape[0], -1)
        hidden = _prelu(r.fc(flat, "fc1"), r["fc1.prelu"])
        probs = _softmax(hidden @ r["cls.weight"] + r["cls.bias"])[:, 1]
        regs = hidden @ r["reg.weight"] + r["reg.bias"]
        return probs, regs

    def run_onet(self, crops: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        o = self._onet
        t = np.asarray(crops, dtype=np.float64)
        t = _maxpool(o.conv(t, "conv1"), 3, 2)
        t = _maxpool(o.conv(t, "conv2"), 3, 2)
        t = _maxpool(o.conv(t, "conv3"), 2, 2)
        t = o.conv(t, "conv4")
        flat = t.reshape(t.shape[0], -1)
        hidden = _prelu(o.fc(flat, "fc1"), o["fc1.prelu"])
        probs = _softmax(hidden @ o["cls.weight"] + o["cls.bias"])[:, 1]
        regs = hidden @ o["reg.weight"] + o["reg.bias"]
        marks = hidden @ o["lmk.weight"] + o["lmk.bias"]
        return probs, regs, marks
