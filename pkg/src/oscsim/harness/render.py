"""Binary PPM (P6) rendering of observed maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..perception import SpocMap
from ..world import CellState

__all__ = ["render_frame", "PALETTE"]

PALETTE = {
    int(CellState.BACKGROUND): (128, 128, 128),
    int(CellState.ACTIONABLE): (220, 60, 60),
    int(CellState.TRANSFORMED): (60, 180, 75),
}
EE_COLOR = (0, 0, 0)


def render_frame(m: SpocMap, ee_pos: tuple[float, float], path, cell_size: float = 1.0) -> None:
    """Write one frame, one pixel per cell, end-effector as a 3x3 black square."""
    h, w = m.grid.shape
    img = np.zeros((h, w, 3), dtype=np.uint8)
    for value, color in PALETTE.items():
        img[m.grid == value] = color
    ix = min(max(int(ee_pos[0] / cell_size), 0), w - 1)
    iy = min(max(int(ee_pos[1] / cell_size), 0), h - 1)
    img[max(0, iy - 1) : iy + 2, max(0, ix - 1) : ix + 2] = EE_COLOR
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
