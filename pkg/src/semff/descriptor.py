"""Per-frame descriptors and camera-motion profiling.

The 446-d frame descriptor concatenates, in order::

    hof_m (50) | hof_o (72) | appearance (144) | content (80) | sequence (100)

Motion is estimated with exhaustive SAD block matching; the horizontal
component of the flow feeds the cumulative displacement curves used to flag
head-turn intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from .ingest import NUM_CLASSES

HOF_MAG_BINS = 50
HOF_ORI_BINS = 72
APPEARANCE_GRID = 4
SEQUENCE_PERIOD = 100
CDC_GRID = 5
DESCRIPTOR_SIZE = HOF_MAG_BINS + HOF_ORI_BINS + APPEARANCE_GRID**2 * 9 + NUM_CLASSES + SEQUENCE_PERIOD

BLOCK_SIZES = {
    "hof_m": HOF_MAG_BINS,
    "hof_o": HOF_ORI_BINS,
    "appearance": APPEARANCE_GRID**2 * 9,
    "content": NUM_CLASSES,
    "sequence": SEQUENCE_PERIOD,
}


@dataclass
class FlowField:
    """Per-block displacement between two frames.

    ``dx``/``dy`` have shape ``(rows, cols)``; ``row_edges``/``col_edges`` hold
    the pixel boundaries of the blocks (length ``rows + 1``/``cols + 1``).
    """

    dx: np.ndarray
    dy: np.ndarray
    row_edges: np.ndarray
    col_edges: np.ndarray

    @property
    def height(self) -> int:
        return int(self.row_edges[-1])

    @property
    def width(self) -> int:
        return int(self.col_edges[-1])

    @property
    def shape(self):
        return self.dx.shape

    def centers(self):
        cy = 0.5 * (self.row_edges[:-1] + self.row_edges[1:])
        cx = 0.5 * (self.col_edges[:-1] + self.col_edges[1:])
        return cy, cx

    @classmethod
    def zeros(cls, width: int, height: int, block: int = 8) -> "FlowField":
        re, ce = _block_edges(height, block), _block_edges(width, block)
        shape = (len(re) - 1, len(ce) - 1)
        return cls(np.zeros(shape), np.zeros(shape), re, ce)

    @classmethod
    def uniform(cls, width: int, height: int, dx: float, dy: float, block: int = 8) -> "FlowField":
        f = cls.zeros(width, height, block)
        f.dx[:] = dx
        f.dy[:] = dy
        return f


@dataclass
class FrameDescriptor:
    hof_m: np.ndarray
    hof_o: np.ndarray
    appearance: np.ndarray
    content: np.ndarray
    sequence: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.hof_m, self.hof_o, self.appearance, self.content, self.sequence])

    def __len__(self):
        return DESCRIPTOR_SIZE


@dataclass
class MotionProfile:
    """Cumulative displacement curves ``C`` (25 x m), their time derivative,
    and (once masked) the per-frame abrupt flags and sampling weights."""

    curves: np.ndarray
    derivative: np.ndarray
    abrupt: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.curves.shape[1]


def to_gray(frame: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma as float64 (same scale as the input)."""
    frame = np.asarray(frame)
    if frame.ndim == 2:
        return frame.astype(np.float64)
    rgb = frame[..., :3].astype(np.float64)
    return rgb @ np.array([0.299, 0.587, 0.114])


def _block_edges(length: int, block: int) -> np.ndarray:
    # last block absorbs the remainder; frames smaller than a block get one block
    count = max(length // block, 1)
    edges = np.arange(count + 1) * block
    edges[-1] = length
    return edges


def _grid_edges(length: int, cells: int) -> np.ndarray:
    step = length // cells
    edges = np.arange(cells + 1) * step
    edges[-1] = length
    return edges


def _block_sum(img: np.ndarray, row_edges: np.ndarray, col_edges: np.ndarray) -> np.ndarray:
    s = np.add.reduceat(img, row_edges[:-1], axis=0)
    return np.add.reduceat(s, col_edges[:-1], axis=1)


def _search_offsets(radius: int):
    offs = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    # smallest displacement wins ties
    offs.sort(key=lambda o: (o[0] ** 2 + o[1] ** 2, o[0], o[1]))
    return offs


def compute_dense_flow(prev: np.ndarray, next: np.ndarray, block: int = 8, radius: int = 7) -> FlowField:
    """Exhaustive SAD block matching on grayscale.

    For each block of ``prev`` the displacement ``(dx, dy)`` with
    ``|dx|, |dy| <= radius`` minimizing the sum of absolute differences
    against ``next`` is reported. Candidates reaching outside ``next`` are not
    considered; ties go to the smallest displacement.
    """
    if block < 4:
        raise ValueError("block must be >= 4 px")
    a, b = to_gray(prev), to_gray(next)
    if a.shape != b.shape:
        raise ValueError(f"frame sizes differ: {a.shape[::-1]} vs {b.shape[::-1]}")
    H, W = a.shape
    re, ce = _block_edges(H, block), _block_edges(W, block)
    best = np.full((len(re) - 1, len(ce) - 1), np.inf)
    bdx = np.zeros_like(best)
    bdy = np.zeros_like(best)
    diff = np.empty_like(a)
    bad = np.empty(a.shape, dtype=np.float64)
    for dy, dx in _search_offsets(radius):
        if abs(dy) >= H or abs(dx) >= W:
            continue
        diff.fill(0.0)
        bad.fill(1.0)
        ys, yd = slice(max(0, -dy), H - max(0, dy)), slice(max(0, dy), H - max(0, -dy))
        xs, xd = slice(max(0, -dx), W - max(0, dx)), slice(max(0, dx), W - max(0, -dx))
        np.abs(a[ys, xs] - b[yd, xd], out=diff[ys, xs])
        bad[ys, xs] = 0.0
        sad = _block_sum(diff, re, ce)
        sad[_block_sum(bad, re, ce) > 0] = np.inf
        better = sad < best
        best[better] = sad[better]
        bdx[better] = dx
        bdy[better] = dy
    return FlowField(bdx, bdy, re, ce)


def flow_histograms(flow: FlowField):
    """L1-normalized histograms of flow magnitude (50 bins) and orientation (72 bins).

    Magnitudes are binned over ``[0, diagonal / 16]`` with the last bin
    open-ended. Orientation uses the full circle in 5 degree bins and skips
    zero-length vectors. An all-zero field yields two all-zero histograms.
    """
    dx, dy = np.ravel(flow.dx), np.ravel(flow.dy)
    mag = np.hypot(dx, dy)
    hof_m = np.zeros(HOF_MAG_BINS)
    hof_o = np.zeros(HOF_ORI_BINS)
    moving = mag > 0
    if not moving.any():
        return hof_m, hof_o

    m_max = np.hypot(flow.width, flow.height) / 16.0
    idx = np.minimum(np.floor(mag * (HOF_MAG_BINS / m_max)).astype(int), HOF_MAG_BINS - 1)
    hof_m += np.bincount(idx, minlength=HOF_MAG_BINS)
    hof_m /= hof_m.sum()

    ang = np.degrees(np.arctan2(dy[moving], dx[moving])) % 360.0
    oidx = np.minimum(np.floor(ang / (360.0 / HOF_ORI_BINS)).astype(int), HOF_ORI_BINS - 1)
    hof_o += np.bincount(oidx, minlength=HOF_ORI_BINS)
    hof_o /= hof_o.sum()
    return hof_m, hof_o


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """RGB in [0, 1] to HSV with all channels in [0, 1]."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    safe = np.where(c > 0, c, 1.0)
    h = np.where(v == r, ((g - b) / safe) % 6.0,
                 np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = np.where(c > 0, h / 6.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def _as_unit_rgb(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = np.repeat(frame[..., None], 3, axis=-1)
    if np.issubdtype(frame.dtype, np.integer):
        return frame[..., :3].astype(np.float64) / 255.0
    return frame[..., :3].astype(np.float64)


def _moments(x: np.ndarray):
    mu = x.mean()
    sd = x.std()
    if sd < 1e-8:
        return mu, sd, 0.0
    return mu, sd, np.mean((x - mu) ** 3) / sd**3


def appearance_descriptor(frame: np.ndarray) -> np.ndarray:
    """Mean, population std and skewness of H, S, V over a 4x4 grid (144 values).

    Integer frames are scaled by 1/255; float frames are taken as [0, 1].
    """
    rgb = _as_unit_rgb(frame)
    H, W = rgb.shape[:2]
    if H < APPEARANCE_GRID or W < APPEARANCE_GRID:
        raise ValueError(f"frame must be at least 4x4, got {W}x{H}")
    hsv = rgb_to_hsv(rgb)
    re, ce = _grid_edges(H, APPEARANCE_GRID), _grid_edges(W, APPEARANCE_GRID)
    out = []
    for r in range(APPEARANCE_GRID):
        for c in range(APPEARANCE_GRID):
            cell = hsv[re[r]:re[r + 1], ce[c]:ce[c + 1]]
            for ch in range(3):
                out.extend(_moments(cell[..., ch].ravel()))
    return np.array(out)


def content_descriptor(detections: Sequence) -> np.ndarray:
    """Raw per-class detection counts over the 80 classes."""
    ids = [d.class_id for d in detections]
    return np.bincount(np.asarray(ids, dtype=int), minlength=NUM_CLASSES).astype(np.float64)


def sequence_descriptor(i: int) -> np.ndarray:
    if i < 0:
        raise ValueError("frame index must be >= 0")
    s = np.zeros(SEQUENCE_PERIOD)
    s[i % SEQUENCE_PERIOD] = 1.0
    return s


def _l2(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x)
    return x / n if n > 0 else x


def describe_frame(frame, flow: FlowField, detections, i: int, normalize: bool = False) -> FrameDescriptor:
    """Build the 446-d descriptor of frame ``i``.

    ``normalize`` L2-normalizes every block before concatenation (off by
    default; raw blocks are concatenated otherwise).
    """
    hof_m, hof_o = flow_histograms(flow)
    parts = [hof_m, hof_o, appearance_descriptor(frame), content_descriptor(detections), sequence_descriptor(i)]
    if normalize:
        parts = [_l2(p) for p in parts]
    return FrameDescriptor(*parts)


def _cell_index(centers: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(edges, centers, side="right") - 1, 0, len(edges) - 2)


def cell_mean_dx(flow: FlowField, grid: int = CDC_GRID) -> np.ndarray:
    """Mean horizontal displacement of the blocks in each cell of a grid x grid split.

    Blocks are assigned by their center pixel; cells without blocks report 0.
    Returns ``grid * grid`` values in row-major cell order.
    """
    cy, cx = flow.centers()
    ri = _cell_index(cy, _grid_edges(flow.height, grid))
    ci = _cell_index(cx, _grid_edges(flow.width, grid))
    cell = (ri[:, None] * grid + ci[None, :]).ravel()
    total = np.bincount(cell, weights=np.ravel(flow.dx), minlength=grid * grid)
    count = np.bincount(cell, minlength=grid * grid)
    return np.divide(total, count, out=np.zeros(grid * grid), where=count > 0)


def cumulative_displacement_curves(flows: Sequence[FlowField], window: int = 31) -> MotionProfile:
    """Running sums of per-cell horizontal displacement, plus their derivative.

    The curves are smoothed with a centered moving average (``window``
    frames, edge values repeated) before a central finite difference.
    """
    if len(flows) < 2:
        raise ValueError("need at least 2 flow fields")
    per_frame = np.stack([cell_mean_dx(f) for f in flows], axis=1)
    return curves_from_displacements(per_frame, window)


def curves_from_displacements(per_frame: np.ndarray, window: int = 31) -> MotionProfile:
    """Same as :func:`cumulative_displacement_curves` from a (cells x m) displacement array."""
    per_frame = np.asarray(per_frame, dtype=np.float64)
    if per_frame.ndim != 2 or per_frame.shape[1] < 2:
        raise ValueError("need at least 2 flow fields")
    C = np.cumsum(per_frame, axis=1)
    smooth = uniform_filter1d(C, size=window, axis=1, mode="nearest")
    return MotionProfile(C, np.gradient(smooth, axis=1))


def abrupt_motion_mask(profile: MotionProfile, weight_low: float = 0.1, weight_high: float = 1.0):
    """Flag frames where every curve derivative shares a strict sign.

    Returns ``(abrupt, weights)`` and stores both on ``profile``.
    """
    d = profile.derivative
    abrupt = np.all(d > 0, axis=0) | np.all(d < 0, axis=0)
    weights = np.where(abrupt, weight_low, weight_high).astype(np.float64)
    profile.abrupt, profile.weights = abrupt, weights
    return abrupt, weights


def extend_to_frames(values: np.ndarray, n: int) -> np.ndarray:
    """Stretch per-transition values (length n-1) to per-frame (length n) by repeating the last."""
    values = np.asarray(values)
    if len(values) >= n:
        return values[:n]
    pad = np.repeat(values[-1:], n - len(values), axis=0)
    return np.concatenate([values, pad])
