"""Weighted locality-constrained reconstruction of a segment and lambda search.

For a segment dictionary ``D`` (one column per frame) the reconstruction
target is ``v = D @ 1`` and the locality distances are ``g_i = ||d_i - v||``.
The activation vector solves::

    min_a ||v - D a||^2 + lam * ||(w * g) * a||^2

which has the closed form ``a = (D^T D + lam diag(q^2))^-1 D^T v`` with
``q = w * g``. Frames whose coefficient is at least ``tau`` times the
largest one are "activated".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

MAX_ITER = 10_000
STEP_FLOOR = 1e-12
INITIAL_STEP = 0.1


@dataclass
class SegmentDictionary:
    D: np.ndarray
    v: np.ndarray
    g: np.ndarray
    w: np.ndarray
    _solver: Optional["WeightedLLC"] = field(default=None, repr=False, compare=False)

    @property
    def f(self) -> int:
        return self.D.shape[0]

    @property
    def n(self) -> int:
        return self.D.shape[1]

    @property
    def q(self) -> np.ndarray:
        return self.w * self.g

    def solver(self) -> "WeightedLLC":
        if self._solver is None:
            self._solver = WeightedLLC(self)
        return self._solver


@dataclass
class ActivationResult:
    alpha: np.ndarray
    lam: float
    selected: np.ndarray
    residual: float
    target: int = 0
    exact: bool = True
    stop_reason: str = "exact"
    iterations: int = 0
    trimmed: bool = False
    probes: list = field(default_factory=list, repr=False)

    @property
    def count(self) -> int:
        return len(self.selected)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "residual": self.residual, "count": self.count,
                "target": self.target, "exact": self.exact, "stop_reason": self.stop_reason,
                "iterations": self.iterations, "trimmed": self.trimmed,
                "indices": [int(i) for i in self.selected]}


def build_dictionary(D, w) -> SegmentDictionary:
    """Reconstruction target, locality distances and weights for one segment."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] < 1 or D.shape[1] < 1:
        raise ValueError("dictionary must be a non-empty f x n matrix")
    w = np.asarray(w, dtype=np.float64).ravel()
    if len(w) != D.shape[1]:
        raise ValueError(f"weight vector has length {len(w)}, dictionary has {D.shape[1]} columns")
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(w))):
        raise ValueError("dictionary and weights must be finite")
    # running sum fixes the summation order (left to right over columns)
    v = np.cumsum(D, axis=1)[:, -1]
    g = np.linalg.norm(D - v[:, None], axis=0)
    return SegmentDictionary(D, v, g, w)


def _stacked_lstsq(D, v, q, lam):
    # min-norm minimizer of ||[D; sqrt(lam) diag(q)] a - [v; 0]||
    A = np.vstack([D, np.sqrt(lam) * np.diag(q)]) if lam > 0 else D
    b = np.concatenate([v, np.zeros(len(q))]) if lam > 0 else v
    return scipy.linalg.lstsq(A, b, lapack_driver="gelsd")[0]


def solve_weighted_llc(dictionary: SegmentDictionary, lam: float) -> np.ndarray:
    """Closed-form activation vector for a given ``lam``.

    Uses the n x n normal equations when n <= f and the f x f push-through
    (Woodbury) form otherwise. For ``lam = 0`` (or a singular system) the
    least-squares solution of smallest ``||q * a||`` is returned, which is
    the ``lam -> 0+`` limit; plain minimum norm is used when some ``q_i = 0``.
    """
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("lambda must be finite and >= 0")
    D, v, q = dictionary.D, dictionary.v, dictionary.q
    f, n = D.shape
    positive = bool(np.all(q > 0))
    if lam > 0 and positive:
        try:
            if n <= f:
                A = D.T @ D
                A[np.diag_indices(n)] += lam * q**2
                return scipy.linalg.solve(A, D.T @ v, assume_a="pos")
            Dq = D / q**2
            K = Dq @ D.T
            K[np.diag_indices(f)] += lam
            return Dq.T @ scipy.linalg.solve(K, v, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            pass
    if positive:
        beta = scipy.linalg.lstsq(D / q, v, lapack_driver="gelsd")[0] if lam == 0 else \
            _stacked_lstsq(D / q, v, np.ones(n), lam)
        return beta / q
    return _stacked_lstsq(D, v, q, lam)


class WeightedLLC:
    """Repeated solves of one dictionary for many ``lam`` values.

    With ``B = D diag(1/q) = U S V^T`` the solution is
    ``a = diag(1/q) V diag(s / (s^2 + lam)) U^T v``, so each solve costs
    O(n * rank) after a single SVD. Dictionaries with some ``q_i = 0`` fall
    back to :func:`solve_weighted_llc`.
    """

    def __init__(self, dictionary: SegmentDictionary):
        self.dictionary = dictionary
        q = dictionary.q
        self.fast = bool(np.all(q > 0))
        if not self.fast:
            return
        self.q = q
        B = dictionary.D / q
        U, s, Vt = np.linalg.svd(B, full_matrices=False)
        tol = max(B.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
        keep = s > tol
        self.s = s[keep]
        self.Vt = Vt[keep]
        self.uv = U[:, keep].T @ dictionary.v
        su = self.s * self.uv
        self.limit = (self.Vt.T @ su) / q
        self._limit_gain = np.linalg.norm(su) * np.linalg.norm(self.Vt, axis=0) / q

    @property
    def sigma_max_sq(self) -> float:
        return float(self.s[0] ** 2) if self.fast and len(self.s) else 0.0

    def solve(self, lam: float) -> np.ndarray:
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.fast:
            return solve_weighted_llc(self.dictionary, lam)
        return (self.Vt.T @ (self.s / (self.s**2 + lam) * self.uv)) / self.q

    def final_count(self, lam: float, tau: float) -> Optional[int]:
        """Activation count shared by every ``lam' >= lam``, if it can be certified.

        ``lam' * a(lam')`` differs from its ``lam -> inf`` limit ``L`` by at most
        ``b_i = |V_i| / q_i * sigma_max^2 / lam * ||S U^T v||`` per entry. When
        each threshold decision on ``L`` survives that perturbation the count
        can no longer change; otherwise ``None``.
        """
        if not self.fast or lam <= 0 or not len(self.s):
            return None
        b = self._limit_gain * (self.s[0] ** 2 / lam)
        a = np.abs(self.limit)
        top, slack = a.max(), b.max()
        on = a - b >= tau * (top + slack)
        off = a + b < tau * (top - slack)
        if np.all(on | off):
            return int(on.sum())
        return None


def activated_frames(alpha, tau: float = 1e-3) -> np.ndarray:
    """Indices with ``|alpha_i| >= tau * max |alpha|``; all indices when alpha is zero."""
    a = np.abs(np.asarray(alpha, dtype=np.float64))
    top = a.max() if len(a) else 0.0
    if top == 0:
        return np.arange(len(a))
    return np.flatnonzero(a >= tau * top)


def num_of_frames(dictionary: SegmentDictionary, lam: float, tau: float = 1e-3) -> int:
    return len(activated_frames(dictionary.solver().solve(lam), tau))


def residual_norm(dictionary: SegmentDictionary, alpha) -> float:
    return float(np.linalg.norm(dictionary.v - dictionary.D @ alpha))


def _result(dictionary, lam, tau, target, **kw) -> ActivationResult:
    alpha = dictionary.solver().solve(lam)
    sel = activated_frames(alpha, tau)
    return ActivationResult(alpha, float(lam), sel, residual_norm(dictionary, alpha), target=target, **kw)


def adjust_lambda(dictionary: SegmentDictionary, target: int, tau: float = 1e-3,
                  max_iter: int = MAX_ITER, step_floor: float = STEP_FLOOR):
    """Search ``lam`` so that exactly ``target`` frames are activated.

    Starting from ``lam = 0`` with step 0.1, probe ``lam + step``: when the
    probe keeps at least ``target`` frames ``lam`` advances by ``step``,
    otherwise the step is divided by ten; stop once a probe hits ``target``.

    The search also stops when the step falls below ``step_floor``, after
    ``max_iter`` probes, or once the count is certified constant for all
    larger ``lam`` (see :meth:`WeightedLLC.final_count`). In those cases the probed
    ``lam`` whose count is closest to ``target`` is used (smaller count, then
    larger ``lam``, on ties) and the result is flagged ``exact=False``.

    Returns ``(lam, ActivationResult)``.
    """
    n = dictionary.n
    if not 1 <= target <= n:
        raise ValueError(f"target must lie in [1, {n}], got {target}")
    solver = dictionary.solver()
    lam, step = 0.0, INITIAL_STEP
    probes = []
    reason = "iteration_cap"
    for it in range(1, max_iter + 1):
        probe = lam + step
        count = num_of_frames(dictionary, probe, tau)
        probes.append((probe, count))
        if count == target:
            res = _result(dictionary, probe, tau, target, iterations=it, probes=probes)
            return probe, res
        if count >= target:
            lam = probe
            # every later probe is >= lam; once its count is certified final
            # the remaining iterations cannot change the outcome
            if solver.final_count(lam, tau) == count:
                reason = "asymptote"
                break
        else:
            step /= 10.0
            if step < step_floor:
                reason = "step_floor"
                break
    best_lam, best_count = min(probes, key=lambda p: (abs(p[1] - target), p[1], -p[0]))
    log.debug("lambda search stopped (%s) after %d probes: count %d for target %d",
              reason, len(probes), best_count, target)
    res = _result(dictionary, best_lam, tau, target, exact=False, stop_reason=reason,
                  iterations=len(probes), probes=probes)
    return best_lam, res


def trim_to_target(result: ActivationResult, target: int) -> ActivationResult:
    """Keep the ``target`` activated frames with the largest ``|alpha|`` (lower index on ties)."""
    if result.count <= target:
        return result
    a = np.abs(result.alpha[result.selected])
    order = np.lexsort((result.selected, -a))[:target]
    result.selected = np.sort(result.selected[order])
    result.trimmed = True
    return result


def sample_segment(D, w, target: int, tau: float = 1e-3, trim: bool = False) -> ActivationResult:
    """Select frames of one segment by weighted sparse reconstruction.

    With ``trim`` the selection is cut down to ``target`` frames by
    coefficient magnitude whenever the lambda search cannot reach it from
    above.
    """
    d = build_dictionary(D, w)
    target = int(min(max(target, 1), d.n))
    if d.n == 1:
        alpha = np.ones(1)
        return ActivationResult(alpha, 0.0, np.array([0]), residual_norm(d, alpha), target=1)
    _, res = adjust_lambda(d, target, tau)
    if trim:
        trim_to_target(res, target)
    return res
