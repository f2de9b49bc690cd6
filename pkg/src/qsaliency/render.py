"""Visual output: SVG chessboard heatmaps and image heatmap overlays.

Output is byte-deterministic for fixed inputs: squares render in a fixed
order, floats are formatted with fixed precision, and nothing depends on
wall-clock or environment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np

from .chess.board import ChessPosition, square_name
from .image import Frame

SQUARE = 48  # svg pixels per board square
MARGIN = 20

# Unicode chess glyphs, keyed by FEN piece letter.
_GLYPHS = {
    "K": "♔", "Q": "♕", "R": "♖", "B": "♗", "N": "♘", "P": "♙",
    "k": "♚", "q": "♛", "r": "♜", "b": "♝", "n": "♞", "p": "♟",
}

_LIGHT = "#f0d9b5"
_DARK = "#b58863"

# Compact viridis approximation: anchors interpolated linearly in RGB.
_VIRIDIS_ANCHORS = (
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
)


@dataclass(frozen=True)
class HeatmapStyle:
    colormap: str = "red_alpha"  # "red_alpha" | "viridis"
    clamp_min: float = 0.0
    clamp_max: float = 1.0
    opacity_scale: float = 0.8

    def __post_init__(self) -> None:
        if self.colormap not in ("red_alpha", "viridis"):
            raise ValueError(f"unknown colormap {self.colormap!r}")
        if self.clamp_min >= self.clamp_max:
            raise ValueError("clamp_min must be below clamp_max")
        if not 0.0 < self.opacity_scale <= 1.0:
            raise ValueError("opacity_scale must lie in (0, 1]")

    def intensity(self, score: float) -> float:
        clamped = min(max(score, self.clamp_min), self.clamp_max)
        return (clamped - self.clamp_min) / (self.clamp_max - self.clamp_min)


def viridis_rgb(t: float) -> Tuple[int, int, int]:
    """Linear interpolation through the viridis anchor colors."""
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_VIRIDIS_ANCHORS, _VIRIDIS_ANCHORS[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return tuple(round(a + (b - a) * f) for a, b in zip(c0, c1))
    return _VIRIDIS_ANCHORS[-1][1]


def _fmt(value: float) -> str:
    return f"{value:.4f}"


def chess_svg(
    pos: ChessPosition,
    scores: Mapping[str, float],
    style: Optional[HeatmapStyle] = None,
    flipped: bool = False,
) -> str:
    """An SVG document of the board with per-square saliency tints.

    ``scores`` maps square names to values in [0, 1]; squares scoring 0 (or
    absent) get no tint element at all.  White's side is at the bottom
    unless ``flipped``.
    """
    style = style or HeatmapStyle()
    size = 8 * SQUARE + 2 * MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    for rank in range(8):
        for file_idx in range(8):
            name = square_name(file_idx + 8 * rank)
            col = 7 - file_idx if flipped else file_idx
            row = rank if flipped else 7 - rank
            x = MARGIN + col * SQUARE
            y = MARGIN + row * SQUARE
            fill = _LIGHT if (rank + file_idx) % 2 else _DARK
            parts.append(
                f'<rect x="{x}" y="{y}" width="{SQUARE}" height="{SQUARE}" fill="{fill}"/>'
            )
            score = scores.get(name, 0.0)
            if score < 0.0 or score > 1.0:
                raise ValueError(f"score for {name} outside [0, 1]: {score!r}")
            intensity = style.intensity(score)
            if score > 0.0 and intensity > 0.0:
                if style.colormap == "red_alpha":
                    tint, opacity = "#ff0000", intensity * style.opacity_scale
                else:
                    r, g, b = viridis_rgb(intensity)
                    tint, opacity = f"#{r:02x}{g:02x}{b:02x}", style.opacity_scale
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{SQUARE}" height="{SQUARE}" '
                    f'fill="{tint}" fill-opacity="{_fmt(opacity)}"/>'
                )
            piece = pos.piece_at(file_idx + 8 * rank)
            if piece is not None:
                cx = x + SQUARE // 2
                cy = y + SQUARE // 2
                parts.append(
                    f'<text x="{cx}" y="{cy}" font-size="{SQUARE - 8}" '
                    f'text-anchor="middle" dominant-baseline="central">{_GLYPHS[piece]}</text>'
                )
    for i in range(8):
        file_label = "hgfedcba"[i] if flipped else "abcdefgh"[i]
        rank_label = str(i + 1) if flipped else str(8 - i)
        x = MARGIN + i * SQUARE + SQUARE // 2
        y = MARGIN + i * SQUARE + SQUARE // 2
        parts.append(
            f'<text x="{x}" y="{size - MARGIN // 2}" font-size="12" '
            f'text-anchor="middle">{file_label}</text>'
        )
        parts.append(
            f'<text x="{MARGIN // 2}" y="{y}" font-size="12" '
            f'text-anchor="middle" dominant-baseline="central">{rank_label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def overlay_frame(
    frame: Frame, grid: np.ndarray, style: Optional[HeatmapStyle] = None
) -> np.ndarray:
    """Alpha-blend a full-resolution heat grid over a grayscale frame.

    Returns an RGB uint8 array of the frame's shape; the grid must already
    be upsampled to frame dimensions.
    """
    style = style or HeatmapStyle()
    if grid.shape != frame.pixels.shape:
        raise ValueError(
            f"grid shape {grid.shape} does not match frame shape {frame.pixels.shape}"
        )
    lo, hi = style.clamp_min, style.clamp_max
    intensity = (np.clip(grid, lo, hi) - lo) / (hi - lo)
    alpha = intensity * style.opacity_scale
    base = np.repeat((frame.pixels * 255.0)[:, :, None], 3, axis=2)
    if style.colormap == "red_alpha":
        heat = np.zeros_like(base)
        heat[:, :, 0] = 255.0
    else:
        flat = np.array([viridis_rgb(t) for t in intensity.ravel()], dtype=np.float64)
        heat = flat.reshape(intensity.shape + (3,))
    blended = base * (1.0 - alpha[:, :, None]) + heat * alpha[:, :, None]
    return np.round(np.clip(blended, 0.0, 255.0)).astype(np.uint8)


def overlay_to_gray(frame: Frame, grid: np.ndarray, style: Optional[HeatmapStyle] = None) -> Frame:
    """Grayscale overlay (heat pushes intensities toward white), for PGM out."""
    style = style or HeatmapStyle()
    if grid.shape != frame.pixels.shape:
        raise ValueError(
            f"grid shape {grid.shape} does not match frame shape {frame.pixels.shape}"
        )
    lo, hi = style.clamp_min, style.clamp_max
    intensity = (np.clip(grid, lo, hi) - lo) / (hi - lo)
    alpha = intensity * style.opacity_scale
    return Frame(np.clip(frame.pixels * (1.0 - alpha) + alpha, 0.0, 1.0))


def write_png(path: str, rgb: np.ndarray, comment: Optional[str] = None) -> None:
    """Write an RGB uint8 array as PNG (deterministic for fixed input).

    ``comment`` lands in a tEXt chunk so reports can carry provenance.
    """
    from PIL import Image
    from PIL.PngImagePlugin import PngInfo

    image = Image.fromarray(rgb, mode="RGB")
    info = None
    if comment is not None:
        info = PngInfo()
        info.add_text("comment", comment)
    image.save(path, format="PNG", pnginfo=info)


def save_chess_svg(path: str, svg_text: str, comment: Optional[str] = None) -> None:
    """Write an SVG document, optionally with a provenance comment line."""
    if comment is not None:
        head, rest = svg_text.split("\n", 1)
        svg_text = head + "\n<!-- " + comment.replace("--", "- -") + " -->\n" + rest
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(svg_text)
