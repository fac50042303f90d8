"""Quality criteria for a frame selection: instability, speed-up and semantic retention."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .descriptor import to_gray


@dataclass
class EvaluationReport:
    n_original: int
    n_selected: int
    required_speedup: float
    speedup_achieved: float
    speedup_deviation: float
    semantic_retention: Optional[float] = None
    instability: Optional[float] = None
    appearance_cv: Optional[float] = None
    instability_window: int = 4
    segments: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def instability_series(frames: Sequence[np.ndarray], window: int = 4) -> np.ndarray:
    """Mean per-pixel temporal std (grayscale) of every window of consecutive frames."""
    if len(frames) < window:
        raise ValueError(f"need at least {window} frames, got {len(frames)}")
    gray = np.stack([to_gray(f) for f in frames])
    return np.array([gray[k:k + window].std(axis=0).mean() for k in range(len(gray) - window + 1)])


def instability_index(frames: Sequence[np.ndarray], window: int = 4) -> float:
    """Average over sliding windows of the mean per-pixel temporal standard deviation."""
    return float(instability_series(frames, window).mean())


def speedup_deviation(n_original: int, n_selected: int, S: float) -> float:
    if n_selected < 1:
        raise ValueError("selection is empty")
    return n_original / n_selected - S


def expected_count(n_original: int, S: float) -> int:
    return max(1, int(round(n_original / S)))


def semantic_retention(selection, scores, S: float) -> float:
    """Selected semantic mass over the best achievable with ``round(n/S)`` frames.

    Returns 1 when the best achievable mass is zero.
    """
    scores = np.asarray(scores, dtype=np.float64)
    k = expected_count(len(scores), S)
    mpsv = np.sort(scores)[::-1][:k].sum()
    if mpsv <= 0:
        return 1.0
    got = scores[np.asarray(selection, dtype=int)].sum()
    return float(min(1.0, got / mpsv))


def coefficient_of_variation(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        raise ValueError("need at least 2 values")
    mu = values.mean()
    if mu == 0:
        return 0.0
    return float(values.std() / mu)


def appearance_cost_cv(timeline) -> float:
    """CV of the per-transition appearance costs of a :class:`SelectionTimeline`."""
    return coefficient_of_variation(timeline.ac_series())


def evaluate_selection(selection, n_original: int, S: float, scores=None, frames=None,
                       appearance=None, window: int = 4, segments=None) -> EvaluationReport:
    """Score a global selection of original-frame indices.

    ``frames`` (indexable by original index), ``scores`` and ``appearance``
    are optional; the matching criteria are left as ``None`` without them.
    """
    selection = np.asarray(selection, dtype=int)
    m = len(selection)
    rep = EvaluationReport(n_original=int(n_original), n_selected=int(m), required_speedup=float(S),
                           speedup_achieved=n_original / m,
                           speedup_deviation=speedup_deviation(n_original, m, S),
                           instability_window=window)
    if scores is not None:
        rep.semantic_retention = semantic_retention(selection, scores, S)
    if frames is not None and m >= window:
        rep.instability = instability_index([frames[i] for i in selection], window)
    if appearance is not None and m >= 3:
        rep.appearance_cv = coefficient_of_variation(appearance.chain_costs(selection))
    if segments is not None:
        for seg in segments:
            inside = selection[(selection >= seg.start) & (selection < seg.end)]
            rep.segments.append({"start": seg.start, "end": seg.end, "kind": seg.kind,
                                 "target": seg.target_frames, "selected": int(len(inside)),
                                 "speedup_achieved": seg.length / len(inside) if len(inside) else None})
    return rep
