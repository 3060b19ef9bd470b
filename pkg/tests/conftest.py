import base64
import io
import os

import numpy as np
import pytest
from PIL import Image as PilImage

from faceauth.embedder import mock_backend

# quiet tensorflow in the optional keras-backend tests
os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")


@pytest.fixture(scope="session")
def mock_embedder():
    """Shared seed-0 mock backend (the projection matrix is large)."""
    return mock_backend(0)


def make_identity_faces(n_identities: int, n_per: int, rng: np.random.Generator,
                        size: int = 160) -> tuple[list[np.ndarray], list[str]]:
    """Distinct random base image per identity plus small per-image
    noise: embeddings of one identity cluster tightly, clusters of
    different identities are far apart."""
    faces, labels = [], []
    for k in range(n_identities):
        base = rng.integers(0, 256, size=(size, size, 3)).astype(np.int64)
        for _ in range(n_per):
            noise = rng.integers(-10, 11, size=(size, size, 3))
            faces.append(np.clip(base + noise, 0, 255).astype(np.uint8))
            labels.append(f"id{k:02d}")
    return faces, labels


def png_data_uri(img: np.ndarray) -> str:
    buf = io.BytesIO()
    PilImage.fromarray(img, "RGB").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def write_crop_archive(root, faces, labels) -> None:
    """Lay out faces as <root>/crops/<label>/<i>.png."""
    crops = root / "crops"
    for i, (face, label) in enumerate(zip(faces, labels)):
        label_dir = crops / label
        label_dir.mkdir(parents=True, exist_ok=True)
        PilImage.fromarray(face, "RGB").save(label_dir / f"{i:03d}.png", format="PNG")
