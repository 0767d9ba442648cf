import numpy as np
import pytest
from PIL import Image as PILImage


def write_png(data: np.ndarray, path) -> None:
    arr = np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path)


def textured_frame(seed: int, size: int = 48) -> np.ndarray:
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / size
    base = 0.3 + 0.4 * ys + 0.15 * np.sin(xs * 11.0)
    data = base[..., None] * rng.uniform(0.7, 1.0, 3)
    data += rng.normal(0, 0.03, (size, size, 3))
    return np.clip(data, 0, 1)


@pytest.fixture()
def image_dir(tmp_path):
    """20-image fixture: 18 textured frames, 1 duplicated frame, 1 flat
    frame (undetectable by the face stub)."""
    root = tmp_path / "images"
    root.mkdir()
    for i in range(18):
        write_png(textured_frame(seed=i), root / f"img_{i:03d}.png")
    # img_018 duplicates img_000 byte-for-byte content-wise.
    write_png(textured_frame(seed=0), root / "img_018.png")
    write_png(np.full((48, 48, 3), 0.5), root / "img_019_flat.png")
    return root
