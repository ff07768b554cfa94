"""Synthetic desktop frames to conceal objects in."""
from __future__ import annotations

import numpy as np

from ..codecs.font import rasterize_text

TITLE_BAR_PX = 24
_LINES = ("File  Edit  View  Help", "Quarterly report - draft 3", "Meeting at 10:30 in room B")


def desktop_screen(width: int = 480, height: int = 400, theme: str = "bright") -> np.ndarray:
    """A window with a title bar and a few lines of text on a flat surface.

    ``theme`` "bright" gives a white document surface, "dark" a black one;
    either way most of the frame is perfectly uniform.
    """
    if theme not in ("bright", "dark"):
        raise ValueError(f"unknown theme {theme!r}")
    bg, bar, ink = (255, 200, 0) if theme == "bright" else (0, 60, 255)
    screen = np.full((height, width), bg, dtype=np.uint8)
    screen[:TITLE_BAR_PX, :] = bar
    y = TITLE_BAR_PX + 6
    for line in _LINES:
        glyphs = rasterize_text(line, 1)
        h, w = glyphs.shape
        if y + h > height:
            break
        w = min(w, width - 8)
        region = screen[y : y + h, 8 : 8 + w]
        region[glyphs[:, :w] == 0] = ink
        y += h + 4
    return screen
