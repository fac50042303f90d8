"""Semantic profile, two-level segmentation and per-segment speed-up allocation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

SEMANTIC = "semantic"
NON_SEMANTIC = "non-semantic"


@dataclass
class SemanticProfile:
    score: np.ndarray
    smoothed_score: np.ndarray

    @property
    def n(self) -> int:
        return len(self.score)


@dataclass
class Segment:
    start: int
    end: int
    kind: str
    speedup: float = 1.0
    target_frames: int = 1

    @property
    def length(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "kind": self.kind,
                "speedup": self.speedup, "target_frames": self.target_frames}


@dataclass
class SegmentPlan:
    segments: list
    speedup_semantic: float
    speedup_non_semantic: float
    required_speedup: float

    @property
    def n(self) -> int:
        return self.segments[-1].end if self.segments else 0

    @property
    def total_target(self) -> int:
        return sum(s.target_frames for s in self.segments)

    def to_dict(self) -> dict:
        return {"required_speedup": self.required_speedup,
                "speedup_semantic": self.speedup_semantic,
                "speedup_non_semantic": self.speedup_non_semantic,
                "segments": [s.to_dict() for s in self.segments]}


def semantic_score(detections: Sequence, frame_dims: tuple) -> float:
    """Sum over detections of confidence x centrality x relative area.

    Centrality is a unit-peak Gaussian of the box center around the frame
    center with sigma = width / 4; ``frame_dims`` is ``(width, height)``.
    """
    width, height = frame_dims
    sigma = width / 4.0
    cx0, cy0 = width / 2.0, height / 2.0
    total = 0.0
    for d in detections:
        x, y, w, h = d.bbox
        r2 = (x + w / 2.0 - cx0) ** 2 + (y + h / 2.0 - cy0) ** 2
        total += d.confidence * math.exp(-r2 / (2.0 * sigma**2)) * (w * h) / (width * height)
    return total


def build_profile(scores, window: int = 51) -> SemanticProfile:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or len(scores) < 2:
        raise ValueError("need at least 2 per-frame scores")
    if not np.all(np.isfinite(scores)) or np.any(scores < 0):
        raise ValueError("scores must be finite and nonnegative")
    smoothed = uniform_filter1d(scores, size=window, mode="nearest")
    return SemanticProfile(scores, smoothed)


def _runs(labels: np.ndarray) -> list:
    cuts = np.flatnonzero(np.diff(labels.astype(np.int8))) + 1
    bounds = np.concatenate([[0], cuts, [len(labels)]])
    return [[int(a), int(b), bool(labels[a])] for a, b in zip(bounds[:-1], bounds[1:])]


def _coalesce(runs: list) -> list:
    out = [runs[0]]
    for r in runs[1:]:
        if r[2] == out[-1][2]:
            out[-1][1] = r[1]
        else:
            out.append(r)
    return out


def segment_profile(profile: SemanticProfile, min_segment_length: int = 50) -> list:
    """Split ``[0, n)`` into alternating semantic / non-semantic segments.

    Frames whose smoothed score is strictly above the profile mean are
    semantic. Runs shorter than ``min_segment_length`` are absorbed, shortest
    first, into the longer of their neighbours (the preceding one on ties).
    """
    s = profile.smoothed_score
    runs = _runs(s > s.mean())
    while len(runs) > 1:
        lengths = [b - a for a, b, _ in runs]
        k = int(np.argmin(lengths))
        if lengths[k] >= min_segment_length:
            break
        if k == 0:
            nb = 1
        elif k == len(runs) - 1:
            nb = k - 1
        else:
            nb = k - 1 if lengths[k - 1] >= lengths[k + 1] else k + 1
        runs[k][2] = runs[nb][2]
        runs = _coalesce(runs)
    return [Segment(a, b, SEMANTIC if sem else NON_SEMANTIC) for a, b, sem in runs]


def _balance_rates(f_sem: int, f_non: int, S: float, s_min: float, cap: float):
    total = f_sem + f_non
    budget = total / S
    if f_sem == 0 or f_non == 0:
        return S, S
    s_sem = max(s_min, S / 2.0)
    rest = budget - f_sem / s_sem
    s_non = f_non / rest if rest > 0 else math.inf
    if S <= s_non <= cap:
        return s_sem, s_non
    s_non = cap if s_non > cap else S
    rest = budget - f_non / s_non
    if rest > 0:
        s_sem = f_sem / rest
        if 1.0 <= s_sem <= s_non:
            return s_sem, s_non
    return S, S


def _distribute_targets(segments: list, total: int) -> None:
    raw = [max(1, min(s.length, round(s.length / s.speedup))) for s in segments]
    order = sorted(range(len(segments)), key=lambda k: (-segments[k].length, k))
    residual = total - sum(raw)
    while residual != 0:
        moved = False
        for k in order:
            if residual > 0 and raw[k] < segments[k].length:
                raw[k] += 1
                residual -= 1
                moved = True
            elif residual < 0 and raw[k] > 1:
                raw[k] -= 1
                residual += 1
                moved = True
            if residual == 0:
                break
        if not moved:
            break
    for s, t in zip(segments, raw):
        s.target_frames = int(t)


def allocate_speedups(segments: list, S: float, s_min: float = 2.0, cap_factor: float = 10.0) -> SegmentPlan:
    """Assign per-segment speed-ups so that semantic parts play slower and the
    whole video meets the overall speed-up ``S``.

    Semantic segments start at ``max(s_min, S/2)``; the non-semantic rate is
    solved from ``F_sem/s_sem + F_non/s_non = n/S``. When that rate leaves
    ``[S, cap_factor*S]`` it is clamped and the semantic rate re-solved; if
    no admissible pair exists both rates fall back to ``S``. Per-segment
    targets are ``round(length/speedup)`` with the rounding residual spread
    over the longest segments so the total equals ``round(n/S)``.
    """
    if not S > 1:
        raise ValueError("speed-up must exceed 1")
    f_sem = sum(s.length for s in segments if s.kind == SEMANTIC)
    f_non = sum(s.length for s in segments if s.kind != SEMANTIC)
    s_sem, s_non = _balance_rates(f_sem, f_non, S, s_min, cap_factor * S)
    for s in segments:
        s.speedup = s_sem if s.kind == SEMANTIC else s_non
    n = f_sem + f_non
    _distribute_targets(segments, max(len(segments), round(n / S)))
    return SegmentPlan(list(segments), s_sem, s_non, S)
