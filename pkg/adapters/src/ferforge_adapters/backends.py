"""Model backends.

`stub` backends are deterministic functions of the image bytes: they need
no weights, satisfy every format contract, and make adapter runs
reproducible for tests and dry runs. `torchscript:<path>` loads a traced
checkpoint for real inference (teacher and embedder kinds). Generator
models (diffusion, expression editors) run in their own environments; the
stub generator stands in for wiring tests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

GENDERS = ("male", "female")
RACES = ("White", "Black", "Indian", "Asian", "Others")
AGE_BUCKETS = ("0-9", "10s", "20s", "30s", "40s", "50s", "60s", "70+")


def _digest_rng(*parts: bytes | str) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(part if isinstance(part, bytes) else part.encode("utf-8"))
        h.update(b"\x1f")
    seed = int.from_bytes(h.digest(), "little")
    return np.random.Generator(np.random.PCG64(seed))


def _to_gray(image: np.ndarray) -> np.ndarray:
    return image @ np.array([0.299, 0.587, 0.114])


class StubTeacher:
    """Softmax posteriors seeded by the image content."""

    def posteriors(self, images: list[np.ndarray], ids: list[str]) -> np.ndarray:
        out = np.empty((len(images), 7), dtype=np.float64)
        for i, image in enumerate(images):
            rng = _digest_rng(b"teacher", np.ascontiguousarray(image).tobytes())
            logits = rng.normal(0.0, 1.5, size=7)
            exp = np.exp(logits - logits.max())
            out[i] = exp / exp.sum()
        return out


class StubEmbedder:
    """Mean-centered, L2-normalized grayscale thumbnails as embeddings.

    Identical images map to identical vectors, so duplicate cosine
    similarity is exactly 1.
    """

    def __init__(self, dim: int = 64):
        side = int(round(dim**0.5))
        if side * side != dim:
            raise ValueError(f"dim must be a square number, got {dim}")
        self.dim = dim
        self._side = side

    def embed(self, images: list[np.ndarray], ids: list[str]) -> np.ndarray:
        out = np.empty((len(images), self.dim), dtype=np.float64)
        for i, image in enumerate(images):
            gray = _to_gray(image)
            h, w = gray.shape
            ys = (np.arange(self._side) * h // self._side).clip(0, h - 1)
            xs = (np.arange(self._side) * w // self._side).clip(0, w - 1)
            thumb = gray[np.ix_(ys, xs)].ravel()
            thumb = thumb - thumb.mean()
            norm = np.linalg.norm(thumb)
            if norm < 1e-12:
                thumb = np.zeros(self.dim)
                thumb[0] = 1.0
            else:
                thumb = thumb / norm
            out[i] = thumb
        return out


class StubFaceDetector:
    """Central face box when the frame has texture; flat frames are a miss.

    Stands in for a detector's behavior including its failure mode, so
    skip-file accounting can be exercised without weights.
    """

    def __init__(self, min_std: float = 0.01):
        self.min_std = min_std

    def detect(self, image: np.ndarray) -> tuple[int, int, int, int] | None:
        gray = _to_gray(image)
        if float(gray.std()) < self.min_std:
            return None
        h, w = gray.shape
        return (w // 8, h // 8, w * 3 // 4, h * 3 // 4)


class StubAttributePredictor:
    """Deterministic demographic categories drawn from the allowed sets."""

    def attributes(self, image: np.ndarray) -> tuple[str, str, str]:
        rng = _digest_rng(b"attrs", np.ascontiguousarray(image).tobytes())
        return (
            GENDERS[int(rng.integers(len(GENDERS)))],
            RACES[int(rng.integers(len(RACES)))],
            AGE_BUCKETS[int(rng.integers(len(AGE_BUCKETS)))],
        )


class StubGenerator:
    """Procedural portrait stand-in: a seeded gradient + noise frame."""

    def __init__(self, size: int = 64):
        self.size = size

    def generate(self, prompt: str, au_vector: str, seed: int, sample_index: int) -> np.ndarray:
        rng = _digest_rng(b"gen", prompt, au_vector, str(seed), str(sample_index))
        s = self.size
        ys, xs = np.mgrid[0:s, 0:s].astype(np.float64) / s
        base = 0.3 + 0.4 * ys + 0.1 * np.sin(xs * 9.0 + rng.uniform(0, 6.28))
        tint = rng.uniform(0.7, 1.0, size=3)
        data = base[..., None] * tint + rng.normal(0, 0.02, (s, s, 3))
        return np.clip(data, 0.0, 1.0)


def _batch_tensor(torch, images: list[np.ndarray], input_size: int, device: str):
    tensors = []
    for image in images:
        t = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).permute(2, 0, 1)
        t = torch.nn.functional.interpolate(
            t[None], size=(input_size, input_size), mode="bilinear", align_corners=False
        )[0]
        tensors.append(t)
    return torch.stack(tensors).to(device)


@dataclass
class TorchscriptTeacher:
    """Teacher posteriors from a traced 7-class checkpoint."""

    path: str
    input_size: int = 112
    device: str = "cpu"

    def __post_init__(self):
        import torch  # deferred: only real runs need it

        self._torch = torch
        self._model = torch.jit.load(self.path, map_location=self.device).eval()

    def posteriors(self, images: list[np.ndarray], ids: list[str]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            batch = _batch_tensor(torch, images, self.input_size, self.device)
            probs = torch.softmax(self._model(batch).float(), dim=1)
        return probs.cpu().numpy().astype(np.float64)


@dataclass
class TorchscriptEmbedder:
    """Embedding export from a traced vision encoder."""

    path: str
    input_size: int = 224
    device: str = "cpu"
    normalize: bool = True

    def __post_init__(self):
        import torch

        self._torch = torch
        self._model = torch.jit.load(self.path, map_location=self.device).eval()

    def embed(self, images: list[np.ndarray], ids: list[str]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            batch = _batch_tensor(torch, images, self.input_size, self.device)
            features = self._model(batch).float()
            if self.normalize:
                features = torch.nn.functional.normalize(features, dim=1)
        return features.cpu().numpy().astype(np.float64)


def make_teacher(model: str, device: str = "cpu"):
    if model == "stub":
        return StubTeacher()
    if model.startswith("torchscript:"):
        return TorchscriptTeacher(model.split(":", 1)[1], device=device)
    raise ValueError(f"unknown teacher model {model!r}")


def make_embedder(model: str, dim: int = 64, device: str = "cpu"):
    if model == "stub":
        return StubEmbedder(dim=dim)
    if model.startswith("torchscript:"):
        return TorchscriptEmbedder(model.split(":", 1)[1], device=device)
    raise ValueError(f"unknown embedder model {model!r}")


def make_face_backends(model: str):
    if model == "stub":
        return StubFaceDetector(), StubAttributePredictor()
    raise ValueError(f"unknown face model {model!r}")


def make_generator(model: str, size: int = 64):
    if model == "stub":
        return StubGenerator(size=size)
    raise ValueError(f"unknown generator model {model!r}")
