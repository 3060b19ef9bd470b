"""Deterministic detector stubs for exercising the cascade.

PlantedFaceBackend responds only at one pyramid scale chosen so the
scaled width is an integer (scale inference from the tensor shape is
then exact) and regresses every firing window exactly onto its planted
target box, so the cascade's output geometry is known in advance.
"""

from __future__ import annotations

import numpy as np

from faceauth.detector import PNET_CELL, PNET_STRIDE

LANDMARKS_10 = np.array([0.3, 0.7, 0.5, 0.32, 0.68, 0.36, 0.36, 0.58, 0.78, 0.78])


class ZeroBackend:
    """All-zero probabilities: nothing is ever detected."""

    def run_pnet(self, image):
        h, w = image.shape[:2]
        mh = max((h - PNET_CELL) // PNET_STRIDE + 1, 0)
        mw = max((w - PNET_CELL) // PNET_STRIDE + 1, 0)
        return np.zeros((mh, mw)), np.zeros((mh, mw, 4))

    def run_rnet(self, crops):
        n = crops.shape[0]
        return np.zeros(n), np.zeros((n, 4))

    def run_onet(self, crops):
        n = crops.shape[0]
        return np.zeros(n), np.zeros((n, 4)), np.zeros((n, 10))


class PlantedFaceBackend:
    """Emits strong proposal responses around planted boxes at one scale;
    refinement stages approve everything they see."""

    def __init__(
        self,
        image_width: int,
        targets: list[tuple[float, float, float, float]],
        fire_scale: float,
        rnet_prob: float = 0.9,
        onet_prob: float = 0.95,
    ):
        self.image_width = image_width
        self.targets = [tuple(float(v) for v in t) for t in targets]
        self.fire_scale = fire_scale
        self.rnet_prob = rnet_prob
        self.onet_prob = onet_prob

    def run_pnet(self, image):
        h, w = image.shape[:2]
        mh = max((h - PNET_CELL) // PNET_STRIDE + 1, 0)
        mw = max((w - PNET_CELL) // PNET_STRIDE + 1, 0)
        prob = np.zeros((mh, mw))
        reg = np.zeros((mh, mw, 4))
        inferred = w / self.image_width
        if abs(inferred - self.fire_scale) > 1e-9:
            return prob, reg
        s = self.fire_scale
        for i in range(mh):
            for j in range(mw):
                wx1, wy1 = j * PNET_STRIDE, i * PNET_STRIDE
                wx2, wy2 = wx1 + PNET_CELL, wy1 + PNET_CELL
                best_iou, best_target = 0.0, None
                for (tx1, ty1, tx2, ty2) in self.targets:
                    sx1, sy1, sx2, sy2 = tx1 * s, ty1 * s, tx2 * s, ty2 * s
                    ix = min(wx2, sx2) - max(wx1, sx1)
                    iy = min(wy2, sy2) - max(wy1, sy1)
                    if ix <= 0 or iy <= 0:
                        continue
                    inter = ix * iy
                    union = PNET_CELL ** 2 + (sx2 - sx1) * (sy2 - sy1) - inter
                    if inter / union > best_iou:
                        best_iou = inter / union
                        best_target = (sx1, sy1, sx2, sy2)
                if best_target is None:
                    continue
                prob[i, j] = min(1.0, np.sqrt(best_iou))
                sx1, sy1, sx2, sy2 = best_target
                reg[i, j] = [
                    (sx1 - wx1) / PNET_CELL,
                    (sy1 - wy1) / PNET_CELL,
                    (sx2 - wx2) / PNET_CELL,
                    (sy2 - wy2) / PNET_CELL,
                ]
        return prob, reg

    def run_rnet(self, crops):
        n = crops.shape[0]
        return np.full(n, self.rnet_prob), np.zeros((n, 4))

    def run_onet(self, crops):
        n = crops.shape[0]
        return np.full(n, self.onet_prob), np.zeros((n, 4)), np.tile(LANDMARKS_10, (n, 1))
