"""Image-state perturbation and pixel-grid saliency for frame-based agents.

A frame's features are its pixels.  Perturbing a pixel blends the frame
toward a blurred copy of itself under a Gaussian mask centered there:

    out = (1 - M) * frame + M * blur(frame, sigma_blur)

with M a Gaussian bump of std ``sigma_mask`` peaking at 1 on the center
pixel.  Saliency is evaluated on a stride grid of centers and upsampled
bilinearly for rendering.  Agents are reached through the external line
protocol; the frame travels as raw row-major uint8 bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import Combiner, NoCommonActionsError, QProfile, sarfa_score


@dataclass(frozen=True)
class BlurSpec:
    """Perturbation parameters, all in pixels."""

    sigma_blur: float = 3.0
    sigma_mask: float = 5.0
    stride: int = 5

    def __post_init__(self) -> None:
        if self.sigma_blur <= 0 or self.sigma_mask <= 0:
            raise ValueError("blur and mask sigmas must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(frozen=True)
class Frame:
    """A grayscale frame: intensities in [0, 1], row-major."""

    pixels: np.ndarray  # shape (height, width), float64

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ValueError("frame must be 2-D")
        if self.pixels.size == 0:
            raise ValueError("frame must be non-empty")
        if float(self.pixels.min()) < 0.0 or float(self.pixels.max()) > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", np.ascontiguousarray(self.pixels, dtype=np.float64))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_bytes(self) -> bytes:
        """Raw row-major uint8 payload for the external-agent protocol."""
        return np.round(self.pixels * 255.0).astype(np.uint8).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes, width: int, height: int) -> "Frame":
        if len(blob) != width * height:
            raise ValueError(f"expected {width * height} bytes, got {len(blob)}")
        data = np.frombuffer(blob, dtype=np.uint8).reshape(height, width)
        return cls(data.astype(np.float64) / 255.0)


def gaussian_mask(width: int, height: int, center: Tuple[int, int], sigma: float) -> np.ndarray:
    """Gaussian bump with peak 1.0 at ``center`` (x, y), clipped to [0, 1]."""
    cx, cy = center
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    mask = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))
    return np.clip(mask, 0.0, 1.0)


def perturb_frame(frame: Frame, center: Tuple[int, int], spec: BlurSpec) -> Frame:
    """Blend the frame toward its blurred copy around ``center``."""
    cx, cy = center
    if not (0 <= cx < frame.width and 0 <= cy < frame.height):
        raise ValueError(f"center {center!r} out of bounds for {frame.width}x{frame.height}")
    blurred = gaussian_filter(frame.pixels, sigma=spec.sigma_blur, mode="reflect")
    mask = gaussian_mask(frame.width, frame.height, center, spec.sigma_mask)
    out = (1.0 - mask) * frame.pixels + mask * blurred
    return Frame(np.clip(out, 0.0, 1.0))


def perturb_stack(
    frames: Sequence[Frame], center: Tuple[int, int], spec: BlurSpec
) -> Tuple[Frame, ...]:
    """Perturb a multi-frame stack: each channel blurred at the same center.

    Agents that consume stacked frames concatenate the channels' payloads
    themselves; the channels must share dimensions.
    """
    if not frames:
        raise ValueError("empty frame stack")
    shape = frames[0].pixels.shape
    if any(f.pixels.shape != shape for f in frames):
        raise ValueError("stacked frames must share dimensions")
    return tuple(perturb_frame(f, center, spec) for f in frames)


def grid_shape(width: int, height: int, stride: int) -> Tuple[int, int]:
    """(columns, rows) of the stride grid covering a width x height frame."""
    return (-(-width // stride), -(-height // stride))


def grid_centers(width: int, height: int, stride: int) -> list:
    """Perturbation centers, row-major: pixel (i*stride, j*stride)."""
    cols, rows = grid_shape(width, height, stride)
    return [(i * stride, j * stride) for j in range(rows) for i in range(cols)]


def compute_frame_saliency(
    frame: Frame,
    selected_action: str,
    evaluate_blob: Callable[[bytes], QProfile],
    spec: Optional[BlurSpec] = None,
    combiner: Combiner = Combiner.HARMONIC,
) -> np.ndarray:
    """Saliency over the stride grid; returns an array of shape (rows, cols).

    ``evaluate_blob`` maps a raw frame payload to a QProfile (typically an
    ExternalSession method).  Centers whose oracle call fails, or whose
    action sets do not overlap, score 0.
    """
    spec = spec or BlurSpec()
    q_orig = evaluate_blob(frame.to_bytes())
    if selected_action not in q_orig:
        raise ValueError(f"agent did not report action {selected_action!r}")
    cols, rows = grid_shape(frame.width, frame.height, spec.stride)
    grid = np.zeros((rows, cols), dtype=np.float64)
    for j in range(rows):
        for i in range(cols):
            center = (i * spec.stride, j * spec.stride)
            perturbed = perturb_frame(frame, center, spec)
            try:
                q_pert = evaluate_blob(perturbed.to_bytes())
            except Exception:
                continue  # center-local oracle failure: leave score 0
            try:
                grid[j, i] = sarfa_score(q_orig, q_pert, selected_action, combiner).score
            except NoCommonActionsError:
                pass
    return grid


def upsample_bilinear(grid: np.ndarray, width: int, height: int, stride: int) -> np.ndarray:
    """Expand a stride-grid of scores to full frame resolution.

    Each grid node sits at pixel (i*stride, j*stride); pixels between nodes
    interpolate bilinearly, and pixels beyond the last node clamp to it.
    """
    rows, cols = grid.shape
    xs = np.minimum(np.arange(width, dtype=np.float64) / stride, cols - 1)
    ys = np.minimum(np.arange(height, dtype=np.float64) / stride, rows - 1)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = (xs - x0)[None, :]
    fy = (ys - y0)[:, None]
    top = grid[y0[:, None], x0[None, :]] * (1 - fx) + grid[y0[:, None], x1[None, :]] * fx
    bottom = grid[y1[:, None], x0[None, :]] * (1 - fx) + grid[y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bottom * fy


_PGM_HEADER = re.compile(rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(path: str) -> Frame:
    """Read a binary (P5) PGM file with maxval up to 255."""
    with open(path, "rb") as handle:
        blob = handle.read()
    match = _PGM_HEADER.match(blob)
    if not match:
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    data = blob[match.end():]
    if len(data) < width * height:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(data[: width * height], dtype=np.uint8).reshape(height, width)
    return Frame(pixels.astype(np.float64) / float(maxval))


def write_pgm(path: str, frame: Frame, comment: Optional[str] = None) -> None:
    """Write a binary (P5) PGM file with maxval 255.

    ``comment`` becomes a header comment line (single-line, '#'-prefixed).
    """
    parts = ["P5\n"]
    if comment is not None:
        parts.append("# " + comment.replace("\n", " ") + "\n")
    parts.append(f"{frame.width} {frame.height}\n255\n")
    header = "".join(parts).encode("ascii", errors="replace")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(frame.to_bytes())
