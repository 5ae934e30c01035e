"""Synthetic 3x16x16 concept corpus: rendering, prompt phrasing, export.

Each image is a shape rendered in a style palette with small seeded jitter
(color, position, size, pixel noise). Prompts are drawn from a small set of
phrasings so that style tokens, shape tokens, attribute tokens, the generic
"thing" token, and filler prefixes all acquire meaning during base training.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .concepts import (
    FILLER_SENTENCE,
    SHAPE_TOKENS,
    STYLE_ATTRIBUTES,
    STYLE_PALETTES,
    STYLE_TOKENS,
)

IMAGE_SIZE = 16


def _shape_mask(shape: str, cx: float, cy: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64)
    if shape == "circle":
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= (0.85 * r) ** 2
    if shape == "square":
        return (np.abs(xx - cx) <= r) & (np.abs(yy - cy) <= r)
    if shape == "triangle":
        # filled upward wedge: widens linearly from the apex
        h = 2.0 * r
        rel = (yy - (cy - r)) / max(h, 1e-9)
        return (rel >= 0) & (rel <= 1) & (np.abs(xx - cx) <= rel * 1.1 * r)
    if shape == "cross":
        # thin plus sign whose arms span the whole canvas
        return (np.abs(xx - cx) <= 1.5) | (np.abs(yy - cy) <= 1.5)
    raise KeyError(f"unknown shape: {shape!r}")


def render_image(style: str, shape: str, rng: np.random.Generator) -> np.ndarray:
    """One jittered (3, 16, 16) float32 image in [-1, 1]."""
    fg, bg = STYLE_PALETTES[style]
    fg = np.clip(np.asarray(fg) + rng.uniform(-0.04, 0.04, 3), 0.0, 1.0)
    bg = np.clip(np.asarray(bg) + rng.uniform(-0.04, 0.04, 3), 0.0, 1.0)
    cx = IMAGE_SIZE / 2 - 0.5 + rng.uniform(-1.0, 1.0)
    cy = IMAGE_SIZE / 2 - 0.5 + rng.uniform(-1.0, 1.0)
    r = rng.uniform(4.5, 5.5)
    mask = _shape_mask(shape, cx, cy, r)
    img = np.where(mask[None, :, :], fg[:, None, None], bg[:, None, None])
    img = img + rng.normal(0.0, 0.015, img.shape)
    return (np.clip(img, 0.0, 1.0) * 2.0 - 1.0).astype(np.float32)


def _style_prompt_phrasing(style: str, shape: str, rng: np.random.Generator) -> list[str]:
    """One training prompt for an image of (style, shape)."""
    roll = rng.random()
    if roll < 0.40:  # canonical "a <style> <shape>"
        return ["a", style, shape]
    if roll < 0.50:  # style with generic object
        return ["a", style, "thing"]
    if roll < 0.60:  # shape only (any style)
        return ["a", shape]
    if roll < 0.72:  # full attribute description (includes the defining hue token)
        return ["a"] + list(STYLE_ATTRIBUTES[style]) + [shape]
    if roll < 0.86:  # partial attribute description (random nonempty subset, in order)
        attrs = list(STYLE_ATTRIBUTES[style])
        keep = rng.random(len(attrs)) < 0.5
        subset = [a for a, k in zip(attrs, keep) if k] or [attrs[int(rng.integers(len(attrs)))]]
        return ["a"] + subset + [shape]
    # filler prefix + canonical body
    k = int(rng.integers(1, len(FILLER_SENTENCE) + 1))
    return list(FILLER_SENTENCE[:k]) + ["a", style, shape]


@dataclass
class ConceptCorpus:
    """Labeled corpus: images (N,3,16,16) in [-1,1], per-image labels and prompts."""

    images: torch.Tensor
    styles: list[str]
    shapes: list[str]
    prompts: list[list[str]]

    def __len__(self) -> int:
        return self.images.shape[0]

    def covered_pairs(self) -> set:
        return set(zip(self.styles, self.shapes))


def generate_corpus(images_per_pair: int, seed: int) -> ConceptCorpus:
    """Balanced corpus covering every (style, shape) pair."""
    if images_per_pair < 1:
        raise ValueError("images_per_pair must be >= 1")
    rng = np.random.default_rng(seed)
    images, styles, shapes, prompts = [], [], [], []
    for style in STYLE_TOKENS:
        for shape in SHAPE_TOKENS:
            for _ in range(images_per_pair):
                images.append(render_image(style, shape, rng))
                styles.append(style)
                shapes.append(shape)
                prompts.append(_style_prompt_phrasing(style, shape, rng))
    return ConceptCorpus(
        images=torch.from_numpy(np.stack(images)),
        styles=styles,
        shapes=shapes,
        prompts=prompts,
    )


def export_corpus(corpus: ConceptCorpus, out_dir: Path | str) -> Path:
    """Write PNG files plus a CSV index (path, style, shape, prompt)."""
    from PIL import Image

    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    index = out_dir / "index.csv"
    with index.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "style", "shape", "prompt"])
        for i in range(len(corpus)):
            arr = ((corpus.images[i].numpy() + 1.0) * 127.5).round().clip(0, 255).astype(np.uint8)
            name = f"images/{i:05d}_{corpus.styles[i]}_{corpus.shapes[i]}.png"
            Image.fromarray(arr.transpose(1, 2, 0)).save(out_dir / name)
            writer.writerow([name, corpus.styles[i], corpus.shapes[i], " ".join(corpus.prompts[i])])
    return index
