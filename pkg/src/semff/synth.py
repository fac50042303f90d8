"""Synthetic first-person corpora.

Two flavours:

* :func:`make_corpus` produces descriptor-shaped feature matrices together
  with semantic scores, motion weights and color histograms, without
  rendering pixels. It scales to tens of thousands of frames.
* :func:`render_video` renders small frames of a camera panning over a
  textured scene (with head turns and a foreground object), plus matching
  detections, for exercising the full frame-based path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .descriptor import (APPEARANCE_GRID, FlowField, flow_histograms, rgb_to_hsv, sequence_descriptor)
from .ingest import NUM_CLASSES, Detection, DetectionSet, save_detections, save_feature_matrix, write_image
from .semantics import semantic_score

FRAME_W, FRAME_H = 64, 48


@dataclass
class SyntheticCorpus:
    features: np.ndarray
    scores: np.ndarray
    weights: np.ndarray
    abrupt: np.ndarray
    histograms: np.ndarray
    detections: DetectionSet
    burst: Optional[tuple] = None
    intervals: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.features.shape[1]


def _intervals(n: int, count: int, length: tuple, rng) -> list:
    out = []
    tries = 0
    while len(out) < count and tries < 1000:
        tries += 1
        L = int(rng.integers(length[0], length[1] + 1))
        if L >= n:
            continue
        a = int(rng.integers(0, n - L))
        if all(a + L <= s or a >= e for s, e in out):
            out.append((a, a + L))
    return sorted(out)


def _pan_speed(n: int, intervals: list, rng) -> np.ndarray:
    u = np.zeros(n)
    e = rng.normal(0, 0.25, n)
    for t in range(1, n):
        u[t] = 0.9 * u[t - 1] + e[t]
    for a, b in intervals:
        u[a:b] = rng.choice([-1.0, 1.0]) * rng.uniform(4.0, 7.0)
    return u


def _bump_hist(centers: np.ndarray, bins: int, width: float) -> np.ndarray:
    # centers in [0, 1]; returns normalized histograms along the last axis
    grid = (np.arange(bins) + 0.5) / bins
    h = np.exp(-0.5 * ((grid - centers[..., None]) / width) ** 2) + 1e-6
    return h / h.sum(axis=-1, keepdims=True)


def _detections_for(i_frames, rng, rate: float, classes: Sequence[int], size=(0.15, 0.35), central=False):
    out = {}
    for i in i_frames:
        k = rng.poisson(rate)
        dets = []
        for _ in range(k):
            fw, fh = rng.uniform(*size) * FRAME_W, rng.uniform(*size) * FRAME_H
            if central:
                cx, cy = FRAME_W / 2 + rng.normal(0, 3), FRAME_H / 2 + rng.normal(0, 3)
            else:
                cx, cy = rng.uniform(0, FRAME_W), rng.uniform(0, FRAME_H)
            dets.append(Detection(int(rng.choice(classes)), float(rng.uniform(0.5, 1.0)),
                                  (cx - fw / 2, cy - fh / 2, fw, fh)))
        out[i] = dets
    return out


def make_corpus(n: int, seed: int = 0, burst: Optional[tuple] = None, abrupt_count: int = 0,
                abrupt_length: tuple = (30, 90), intervals: Optional[list] = None, bins: int = 32,
                weight_low: float = 0.1, weight_high: float = 1.0, scene_cuts: int = 3,
                background_rate: float = 0.3, burst_rate: float = 6.0) -> SyntheticCorpus:
    """Descriptor-shaped synthetic video of ``n`` frames.

    ``burst`` is a ``(start, end)`` frame range with many central person
    detections and a distinct color cast. Abrupt camera-motion intervals
    are either given in ``intervals`` or drawn at random (``abrupt_count``).
    """
    rng = np.random.default_rng(seed)
    if intervals is None:
        intervals = _intervals(n, abrupt_count, abrupt_length, rng)
    abrupt = np.zeros(n, dtype=bool)
    for a, b in intervals:
        abrupt[a:b] = True
    weights = np.where(abrupt, weight_low, weight_high)

    # motion blocks
    u = _pan_speed(n, intervals, rng)
    hof = np.empty((50 + 72, n))
    for i in range(n):
        f = FlowField.uniform(FRAME_W, FRAME_H, 0.0, 0.0)
        f.dx[:] = np.round(u[i] + rng.normal(0, 0.6, f.shape))
        f.dy[:] = np.round(rng.normal(0, 0.6, f.shape))
        hm, ho = flow_histograms(f)
        hof[:50, i], hof[50:, i] = hm, ho

    # scene color: piecewise-constant palette plus a slow drift, per-cell offsets
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(scene_cuts, n - 1), replace=False))
    scene = np.searchsorted(cuts, np.arange(n), side="right")
    palette = rng.uniform(0.15, 0.85, size=(scene.max() + 1, 3))
    drift = np.cumsum(rng.normal(0, 0.004, size=(n, 3)), axis=0)
    rgb = np.clip(palette[scene] + drift, 0.02, 0.98)
    if burst is not None:
        rgb[burst[0]:burst[1]] = np.clip(rgb[burst[0]:burst[1]] * [1.4, 0.6, 0.6], 0.02, 0.98)
    cells = APPEARANCE_GRID**2
    cell_rgb = np.clip(rgb[:, None, :] + rng.normal(0, 0.05, size=(1, cells, 3))
                       + rng.normal(0, 0.01, size=(n, cells, 3)), 0, 1)
    hsv = rgb_to_hsv(cell_rgb)
    stats = np.empty((n, cells, 3, 3))
    stats[..., 0] = hsv
    stats[..., 1] = np.abs(rng.normal(0.08, 0.02, size=(n, cells, 3)))
    stats[..., 2] = rng.normal(0, 0.3, size=(n, cells, 3))
    appearance = stats.reshape(n, -1).T

    # color histograms around the frame color
    histograms = _bump_hist(rgb, bins, 0.06)

    # detections, content histogram and semantic score
    per_frame = _detections_for(range(n), rng, background_rate, classes=range(1, NUM_CLASSES))
    if burst is not None:
        extra = _detections_for(range(*burst), rng, burst_rate, classes=[0], size=(0.3, 0.5), central=True)
        for i, d in extra.items():
            per_frame[i] = per_frame[i] + d
    detections = DetectionSet([per_frame[i] for i in range(n)])
    content = np.zeros((NUM_CLASSES, n))
    for i, dets in enumerate(detections.per_frame):
        for d in dets:
            content[d.class_id, i] += 1
    scores = np.array([semantic_score(d, (FRAME_W, FRAME_H)) for d in detections.per_frame])
    if burst is None:
        # background detections are not semantic
        scores[:] = 0.0
    else:
        mask = np.zeros(n, dtype=bool)
        mask[burst[0]:burst[1]] = True
        scores[~mask] = 0.0

    seq = np.stack([sequence_descriptor(i) for i in range(n)], axis=1)
    features = np.vstack([hof, appearance, content, seq])
    return SyntheticCorpus(features, scores, weights.astype(np.float64), abrupt, histograms,
                           detections, burst, intervals)


def write_corpus(corpus: SyntheticCorpus, out_dir, speedup: float = 10.0) -> dict:
    """Write a corpus as feature/histogram files, score/weight vectors and a config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "features": out / "features.bin",
        "histograms": out / "histograms.bin",
        "scores": out / "scores.txt",
        "weights_file": out / "weights.txt",
    }
    save_feature_matrix(paths["features"], corpus.features)
    save_feature_matrix(paths["histograms"], corpus.histograms.reshape(corpus.n, -1).T)
    np.savetxt(paths["scores"], corpus.scores, fmt="%.17g")
    np.savetxt(paths["weights_file"], corpus.weights, fmt="%.17g")
    save_detections(out / "detections.jsonl", corpus.detections)
    cfg = [f"speedup = {float(speedup)!r}"] + [f'{k} = "{v.name}"' for k, v in paths.items()]
    (out / "config.toml").write_text("\n".join(cfg) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


def _texture(width: int, height: int, rng) -> np.ndarray:
    base = gaussian_filter(rng.uniform(0, 1, size=(height, width, 3)), sigma=(2.0, 2.0, 0))
    base = (base - base.min()) / (np.ptp(base) + 1e-12)
    return (40 + 180 * base).astype(np.uint8)


def render_video(n: int, seed: int = 0, width: int = FRAME_W, height: int = FRAME_H,
                 intervals: Sequence[tuple] = (), burst: Optional[tuple] = None,
                 turn_speed: int = 5):
    """Frames of a camera sliding over a textured panorama.

    The camera drifts right by one pixel every other frame; during each
    ``intervals`` range it turns at ``turn_speed`` px/frame. During
    ``burst`` a red object sits in the middle of the view and is reported
    as a centered person detection. Returns ``(frames, detections)``.
    """
    rng = np.random.default_rng(seed)
    speed = np.array([t % 2 for t in range(n)], dtype=int)
    for a, b in intervals:
        speed[a:b] = turn_speed
    pos = np.concatenate([[0], np.cumsum(speed[:-1])])
    pano = _texture(int(pos[-1]) + width + 1, height, rng)
    frames, dets = [], []
    for t in range(n):
        f = pano[:, pos[t]:pos[t] + width].copy()
        d = []
        if burst is not None and burst[0] <= t < burst[1]:
            ow, oh = width // 3, height // 2
            x0, y0 = (width - ow) // 2, (height - oh) // 2
            f[y0:y0 + oh, x0:x0 + ow] = (200, 40, 40)
            d.append(Detection(0, 0.9, (float(x0), float(y0), float(ow), float(oh))))
        frames.append(f)
        dets.append(d)
    return frames, DetectionSet(dets)


def write_video(frames, detections: DetectionSet, out_dir) -> Path:
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(frames):
        write_image(out / "frames" / f"{k:06d}.png", f)
    save_detections(out / "detections.jsonl", detections)
    return out


def oversampled_selection(n: int, m: int, seed: int = 0, cluster=(3, 7)) -> np.ndarray:
    """About ``m`` sorted frame indices bunched into runs of consecutive frames.

    This mimics a sparse sampler that oversamples a few stretches and skips
    long gaps in between. Run lengths are ``m // k`` for ``k`` runs, with
    ``m / k`` drawn from ``cluster``.
    """
    rng = np.random.default_rng(seed)
    k = max(2, m // int(rng.integers(*cluster)))
    starts = np.sort(rng.choice(n, size=k, replace=False))
    sel = {min(n - 1, int(s) + d) for s in starts for d in range(max(1, m // k))}
    return np.array(sorted(sel), dtype=int)
