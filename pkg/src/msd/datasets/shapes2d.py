"""Shapes2D-16: a hard-edged glyph moving on a toroidal 16x16 canvas.

The canvas is an 8x8 grid of 2-pixel cells. A 3x3-cell glyph starts at one of
nine cells and moves by a fixed pattern each step. Speed also sets the glyph's
brightness so that a motionless glyph still reveals its speed label.
"""

from __future__ import annotations

import numpy as np

from .factors import FactorSpec

SIZE = 16
CELL = 2
GRID = SIZE // CELL
SEQ_LEN = 8

COLORS = {"red": (1.0, 0.0, 0.0), "green": (0.0, 1.0, 0.0), "blue": (0.0, 0.0, 1.0), "yellow": (1.0, 1.0, 0.0)}
GLYPHS = {
    "square": np.ones((3, 3), dtype=bool),
    "plus": np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    "cross": np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]], dtype=bool),
}
START_COORDS = (0, 3, 5)
STARTS = tuple(f"r{r}c{c}" for r in START_COORDS for c in START_COORDS)
# (row, col) step per time index; orbit cycles right, down, left, up
MOTIONS = {
    "left": [(0, -1)],
    "right": [(0, 1)],
    "up": [(-1, 0)],
    "down": [(1, 0)],
    "orbit": [(0, 1), (1, 0), (0, -1), (-1, 0)],
    "none": [(0, 0)],
}
SPEEDS = {"slow": (1, 1.0), "fast": (2, 0.6)}


def factor_specs() -> list[FactorSpec]:
    return [
        FactorSpec("color", "static", tuple(COLORS)),
        FactorSpec("shape", "static", tuple(GLYPHS)),
        FactorSpec("start", "static", STARTS, frame_observable=False),
        FactorSpec("motion", "dynamic", tuple(MOTIONS)),
        FactorSpec("speed", "dynamic", tuple(SPEEDS)),
    ]


def glyph_cells(config) -> list[tuple[int, int]]:
    """Top-left cell of the glyph at every time step."""
    _, _, start, motion, speed = (int(v) for v in config)
    r = START_COORDS[start // 3]
    c = START_COORDS[start % 3]
    steps = MOTIONS[tuple(MOTIONS)[motion]]
    cells_per_step = SPEEDS[tuple(SPEEDS)[speed]][0]
    out = [(r, c)]
    for t in range(1, SEQ_LEN):
        dr, dc = steps[(t - 1) % len(steps)]
        r = (r + dr * cells_per_step) % GRID
        c = (c + dc * cells_per_step) % GRID
        out.append((r, c))
    return out


def render(config) -> np.ndarray:
    """T x 3 x 16 x 16 float32 frames in [0, 1]."""
    color, shape, _, _, speed = (int(v) for v in config)
    rgb = np.asarray(COLORS[tuple(COLORS)[color]], dtype=np.float32) * np.float32(SPEEDS[tuple(SPEEDS)[speed]][1])
    mask = GLYPHS[tuple(GLYPHS)[shape]]
    frames = np.zeros((SEQ_LEN, 3, SIZE, SIZE), dtype=np.float32)
    for t, (r, c) in enumerate(glyph_cells(config)):
        grid = np.zeros((GRID, GRID), dtype=bool)
        for dr in range(3):
            for dc in range(3):
                if mask[dr, dc]:
                    grid[(r + dr) % GRID, (c + dc) % GRID] = True
        pixels = np.kron(grid, np.ones((CELL, CELL), dtype=bool))
        frames[t] = rgb[:, None, None] * pixels[None]
    return frames


def render_all(states: np.ndarray) -> np.ndarray:
    return np.stack([render(s) for s in states])
