"""Smoothing of frame transitions.

The appearance cost of a transition is the 1-D earth mover's distance
between color histograms, summed over the RGB channels. The instability of
a transition from original frame ``x`` to ``y`` is::

    I(x, y) = AC(x, y) * (y - x - speedup)

Frames are inserted one at a time into the transition with the largest
instability, at the interior frame minimizing ``I(x, j)^2 + I(j, y)^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


class Saturated(Exception):
    """No transition has a free frame strictly between its endpoints."""


def color_histogram(frame: np.ndarray, bins: int = 32) -> np.ndarray:
    """Per-channel L1-normalized histograms, shape ``(3, bins)``, over ``[0, 256)``."""
    px = np.asarray(frame)
    if px.ndim == 2:
        px = np.repeat(px[..., None], 3, axis=-1)
    px = px[..., :3].reshape(-1, 3).astype(np.int64)
    idx = px * bins // 256
    h = np.stack([np.bincount(idx[:, c], minlength=bins) for c in range(3)]).astype(np.float64)
    return h / h.sum(axis=1, keepdims=True)


def emd_1d(h1, h2) -> float:
    """EMD between two equal-mass 1-D histograms with unit distance between adjacent bins."""
    h1, h2 = np.asarray(h1, dtype=np.float64), np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise ValueError("histograms must have the same number of bins")
    if abs(h1.sum() - h2.sum()) > 1e-9:
        raise ValueError("histogram masses differ")
    return float(np.abs(np.cumsum(h1 - h2)).sum())


def appearance_cost(hist_x: np.ndarray, hist_y: np.ndarray) -> float:
    return sum(emd_1d(a, b) for a, b in zip(hist_x, hist_y))


class AppearanceModel:
    """Appearance costs between any two frames of a video.

    Built from per-frame color histograms (``n x 3 x bins``); with no
    histograms every transition costs 1.
    """

    def __init__(self, histograms: Optional[np.ndarray] = None):
        self.cdf = None if histograms is None else np.cumsum(np.asarray(histograms, dtype=np.float64), axis=-1)

    @classmethod
    def from_frames(cls, frames, bins: int = 32) -> "AppearanceModel":
        return cls(np.stack([color_histogram(f, bins) for f in frames]))

    def cost(self, x: int, y: int) -> float:
        if self.cdf is None:
            return 1.0
        return float(np.abs(self.cdf[x] - self.cdf[y]).sum())

    def costs(self, x: int, ys) -> np.ndarray:
        ys = np.asarray(ys, dtype=int)
        if self.cdf is None:
            return np.ones(len(ys))
        return np.abs(self.cdf[ys] - self.cdf[x]).sum(axis=(1, 2))

    def chain_costs(self, indices) -> np.ndarray:
        """Costs of consecutive pairs of ``indices``."""
        idx = np.asarray(indices, dtype=int)
        if len(idx) < 2:
            return np.zeros(0)
        if self.cdf is None:
            return np.ones(len(idx) - 1)
        return np.abs(self.cdf[idx[1:]] - self.cdf[idx[:-1]]).sum(axis=(1, 2))


def instability(ac: float, x: int, y: int, speedup: float) -> float:
    if y <= x:
        raise ValueError("transition must go forward in time")
    return ac * (y - x - speedup)


@dataclass
class SelectionTimeline:
    """Selected original-frame indices of one segment ``[start, end)``."""

    indices: np.ndarray
    start: int
    end: int
    speedup: float
    appearance: AppearanceModel

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        if len(self.indices) < 1:
            raise ValueError("timeline needs at least one frame")
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("timeline indices must be strictly increasing")
        if self.indices[0] < self.start or self.indices[-1] >= self.end:
            raise ValueError("timeline indices fall outside the segment")

    def __len__(self):
        return len(self.indices)

    def ac_series(self) -> np.ndarray:
        return self.appearance.chain_costs(self.indices)

    def instability_series(self) -> np.ndarray:
        gaps = np.diff(self.indices)
        return self.ac_series() * (gaps - self.speedup)

    def copy(self) -> "SelectionTimeline":
        return SelectionTimeline(self.indices.copy(), self.start, self.end, self.speedup, self.appearance)


def find_shakiest_transition(timeline: SelectionTimeline, inst: Optional[np.ndarray] = None) -> int:
    """Position ``i`` of the transition ``(s_i, s_i+1)`` with the largest instability.

    Only transitions with at least one frame strictly inside are eligible;
    ties go to the smallest ``i``. Raises :class:`Saturated` if none is.
    """
    if inst is None:
        inst = timeline.instability_series()
    open_ = np.diff(timeline.indices) >= 2
    if not open_.any():
        raise Saturated("no transition admits an insertion")
    masked = np.where(open_, inst, -np.inf)
    return int(np.argmax(masked))


def best_insert_frame(timeline: SelectionTimeline, i: int) -> int:
    """Interior frame ``j`` of transition ``i`` minimizing ``I(s_i, j)^2 + I(j, s_i+1)^2``."""
    x, y = int(timeline.indices[i]), int(timeline.indices[i + 1])
    js = np.arange(x + 1, y)
    if len(js) == 0:
        raise ValueError(f"transition {i} ({x} -> {y}) has no interior frame")
    sp = timeline.speedup
    app = timeline.appearance
    left = app.costs(x, js) * (js - x - sp)
    right = app.costs(y, js) * (y - js - sp)
    return int(js[np.argmin(left**2 + right**2)])


def _widen(timeline: SelectionTimeline) -> bool:
    # extend the span by one adjacent frame, on the side with the cheaper
    # appearance cost (longer uncovered run, then head, on ties)
    idx = timeline.indices
    app = timeline.appearance
    head = idx[0] - timeline.start
    tail = timeline.end - 1 - idx[-1]
    if head == 0 and tail == 0:
        return False
    options = []
    if head:
        options.append((app.cost(idx[0] - 1, idx[0]), -head, 0, idx[0] - 1))
    if tail:
        options.append((app.cost(idx[-1], idx[-1] + 1), -tail, 1, idx[-1] + 1))
    j = min(options)[3]
    timeline.indices = np.sort(np.append(idx, j))
    return True


def smooth_transitions(timeline: SelectionTimeline, target: int, widen: bool = False) -> SelectionTimeline:
    """Insert frames into the shakiest transitions until ``target`` frames are selected.

    Stops early when no transition admits an insertion. With ``widen`` the
    selection instead grows by the frame just before or after it (whichever
    transition is visually cheaper), so only a fully selected segment
    saturates.
    """
    out = timeline.copy()
    if target < len(out):
        raise ValueError(f"target {target} is below the current selection size {len(out)}")
    if target > out.end - out.start:
        raise ValueError(f"target {target} exceeds the segment length {out.end - out.start}")
    inst = out.instability_series()
    while len(out) < target:
        try:
            i = find_shakiest_transition(out, inst)
        except Saturated:
            if widen and _widen(out):
                inst = out.instability_series()
                continue
            break
        j = best_insert_frame(out, i)
        out.indices = np.insert(out.indices, i + 1, j)
        x, y = out.indices[i], out.indices[i + 2]
        app, sp = out.appearance, out.speedup
        pair = np.array([app.cost(x, j) * (j - x - sp), app.cost(j, y) * (y - j - sp)])
        inst = np.concatenate([inst[:i], pair, inst[i + 1:]])
    return out


def write_transitions_csv(path, indices, appearance: AppearanceModel, speedup) -> None:
    """One row per transition: ``from, to, appearance_cost, instability``.

    ``speedup`` is a scalar or a per-transition array.
    """
    idx = np.asarray(indices, dtype=int)
    ac = appearance.chain_costs(idx)
    sp = np.broadcast_to(np.asarray(speedup, dtype=np.float64), ac.shape)
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["from", "to", "appearance_cost", "instability"])
        for k in range(len(ac)):
            gap = idx[k + 1] - idx[k]
            wr.writerow([int(idx[k]), int(idx[k + 1]), repr(float(ac[k])), repr(float(ac[k] * (gap - sp[k])))])
