"""Independent reference computations used by the unit and acceptance tests.

None of these call into the library code they check.
"""

import networkx as nx
import numpy as np


# -- earth mover's distance ---------------------------------------------------

def emd_min_cost_flow(c1, c2) -> int:
    """Exact transport cost between two integer histograms of equal total mass.

    Bipartite supply/demand network with cost |i - j| between bins, solved by
    network simplex on integers.
    """
    c1, c2 = [int(x) for x in c1], [int(x) for x in c2]
    assert sum(c1) == sum(c2)
    B = len(c1)
    G = nx.DiGraph()
    for i in range(B):
        G.add_node(("s", i), demand=-c1[i])
        G.add_node(("t", i), demand=c2[i])
    for i in range(B):
        for j in range(B):
            G.add_edge(("s", i), ("t", j), weight=abs(i - j))
    return nx.network_simplex(G)[0]


def random_count_pair(rng, bins: int, mass: int):
    """Two random integer histograms with ``bins`` bins summing to ``mass``."""
    out = []
    for _ in range(2):
        cuts = np.sort(rng.integers(0, mass + 1, size=bins - 1))
        out.append(np.diff(np.concatenate([[0], cuts, [mass]])))
    return out


# -- instability ----------------------------------------------------------------

def instability_bruteforce(frames, window=4):
    """Per-pixel loops: population std over each window, averaged over pixels then windows."""
    H, W = frames[0].shape[:2]
    gray = []
    for f in frames:
        f = np.asarray(f, dtype=np.float64)
        if f.ndim == 2:
            gray.append(f)
        else:
            gray.append(0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2])
    values = []
    for k in range(len(frames) - window + 1):
        total = 0.0
        for y in range(H):
            for x in range(W):
                px = [gray[k + t][y, x] for t in range(window)]
                mu = sum(px) / window
                total += (sum((p - mu) ** 2 for p in px) / window) ** 0.5
        values.append(total / (H * W))
    return sum(values) / len(values)


# -- step-function dictionaries --------------------------------------------------

def step_instance(rng, breakpoints, f=None, tau=0.5):
    """Dictionary with orthogonal columns whose activation count is a known step function.

    Column ``i`` is ``c_i q_i`` for orthonormal ``q_i``; then
    ``a_i(lam) = 1 / (1 + lam r_i)`` with ``r_i = (w_i g_i / c_i)^2`` and
    ``g_i^2 = sum_j c_j^2 - c_i^2``. Column 0 has the smallest ``r`` and stays
    active forever; column ``i > 0`` is active exactly while
    ``lam <= breakpoints[i - 1]``, which fixes ``r_i = r_0 / tau + (1/tau - 1) / b_i``.

    Returns ``(D, w, r)``.
    """
    b = np.asarray(breakpoints, dtype=np.float64)
    n = len(b) + 1
    f = f or n + 3
    Q, _ = np.linalg.qr(rng.normal(size=(f, n)))
    c = rng.uniform(0.5, 2.0, size=n)
    g = np.sqrt(np.sum(c**2) - c**2)
    r0 = rng.uniform(0.2, 1.0)
    r = np.concatenate([[r0], r0 / tau + (1 / tau - 1) / b])
    w = np.sqrt(r) * c / g
    return Q * c, w, r


def analytic_counts(r, lams, tau):
    """Activation counts of a step instance at every ``lam`` in ``lams``."""
    lams = np.asarray(lams, dtype=np.float64)[:, None]
    a = 1.0 / (1.0 + lams * np.asarray(r)[None, :])
    return np.sum(a >= tau * a.max(axis=1, keepdims=True), axis=1)


def grid_reachable(r, tau, lam_max, resolution=1e-6, chunk=1_000_000):
    """Set of counts hit on the grid ``0, resolution, 2*resolution, ... <= lam_max``."""
    hit = set()
    total = int(np.floor(lam_max / resolution)) + 1
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk))
        hit.update(np.unique(analytic_counts(r, k * resolution, tau)).tolist())
    return hit


def best_subset(D, k):
    """Brute force: the ``k`` columns whose span best reconstructs ``v = D 1``."""
    from itertools import combinations
    v = D.sum(axis=1)
    best, best_res = None, np.inf
    for S in combinations(range(D.shape[1]), k):
        A = D[:, S]
        coef = np.linalg.lstsq(A, v, rcond=None)[0]
        res = np.linalg.norm(v - A @ coef)
        if res < best_res - 1e-12:
            best, best_res = S, res
    return list(best)
