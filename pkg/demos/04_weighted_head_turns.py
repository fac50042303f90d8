"""
Sampling densely through head turns
===================================

During a fast head turn a fixed stride skips over large parts of the scene.
Lowering the locality weight to 0.1 inside those intervals makes the
sampler keep more frames there. Here the turn interval is planted, and we
compare a weighted run with an unweighted one at the same frame budget.
"""
import numpy as np

from semff.sampler import sample_segment
from semff.synth import make_corpus

n, budget = 1000, 50
a, b = 400, 550
corpus = make_corpus(n, seed=7, intervals=[(a, b)])

weighted = sample_segment(corpus.features, corpus.weights, budget, trim=True)
plain = sample_segment(corpus.features, np.ones(n), budget, trim=True)

def inside(sel):
    return int(np.sum((sel >= a) & (sel < b)))

print(f"turn covers frames [{a}, {b}), {(b - a) / n:.0%} of the video")
print(f"weighted run:   {inside(weighted.selected):2d} of {budget} frames inside the turn (lambda {weighted.lam:.4g})")
print(f"unweighted run: {inside(plain.selected):2d} of {budget} frames inside the turn (lambda {plain.lam:.4g})")
