"""Turning payloads into binary raster objects ready for embedding.

Objects are gray images holding only 0 (ink, the cells that get
embedded) and 255 (left at the background level).
"""
from __future__ import annotations

import numpy as np

from ..imaging import as_gray, binarize, otsu_threshold
from .qr import SIZE as QR_SIZE


def prepare_image_object(img) -> np.ndarray:
    """Reduce a gray picture to two colors at its Otsu level."""
    g = as_gray(img)
    return binarize(g, otsu_threshold(g))


def symbol_image(modules, quiet_zone: int = 0) -> np.ndarray:
    """One pixel per module, dark modules 0, optional light border."""
    m = np.asarray(modules, dtype=bool)
    img = np.where(m, 0, 255).astype(np.uint8)
    if quiet_zone:
        img = np.pad(img, quiet_zone, constant_values=255)
    return img


def rectangle_object(width: int, height: int | None = None) -> np.ndarray:
    height = width if height is None else height
    return np.zeros((height, width), dtype=np.uint8)


def synthetic_floor_plan(width: int = 140, height: int = 91, seed: int = 0) -> np.ndarray:
    """Gray office-plan-like raster: walls, desks and a light floor.

    Default size keeps the 1400x906 proportions of a typical scanned
    building plan at one tenth scale.  Values are deliberately not binary
    (walls ~50, floor ~200 with mild texture) so the Otsu reduction has
    work to do.
    """
    rng = np.random.default_rng(seed)
    img = np.full((height, width), 200, dtype=np.int16)
    img += rng.integers(-6, 7, size=img.shape, dtype=np.int16)
    wall = max(1, min(width, height) // 45)
    img[:wall, :] = img[-wall:, :] = 50
    img[:, :wall] = img[:, -wall:] = 50
    cols = 5
    corridor = height // 2
    img[corridor - wall : corridor + wall, :] = 50
    for i in range(1, cols):
        x = i * width // cols
        img[:, x : x + wall] = 50
        # doors into the corridor
        door = max(2, width // (4 * cols))
        img[corridor - 3 * wall - door : corridor - 3 * wall, x : x + wall] = 200
        img[corridor + 3 * wall : corridor + 3 * wall + door, x : x + wall] = 200
    desk = max(2, width // 35)
    for _ in range(2 * cols):
        x = int(rng.integers(2 * wall, width - desk - 2 * wall))
        y = int(rng.integers(2 * wall, height - desk - 2 * wall))
        img[y : y + desk, x : x + desk] = 90
    return np.clip(img, 0, 255).astype(np.uint8)


__all__ = [
    "QR_SIZE",
    "prepare_image_object",
    "rectangle_object",
    "symbol_image",
    "synthetic_floor_plan",
]
