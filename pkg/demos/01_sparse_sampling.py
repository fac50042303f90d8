"""
Picking frames by sparse reconstruction
=======================================

Each column of a dictionary describes one frame. The target is the sum of
all columns. A penalty that grows with each frame's distance from that sum
pushes coefficients towards zero, and the frames whose coefficients stay
above a small fraction of the largest one are the ones we keep.
"""
import numpy as np

from semff.sampler import activated_frames, adjust_lambda, build_dictionary, sample_segment, solve_weighted_llc
from semff.synth import make_corpus

# A small dictionary whose frames differ a lot in how much they carry:
# orthogonal columns with norms spread over four orders of magnitude.
rng = np.random.default_rng(0)
Q, _ = np.linalg.qr(rng.normal(size=(30, 20)))
d = build_dictionary(Q * np.logspace(-2, 2, 20), np.ones(20))

print("lambda = 0:", len(activated_frames(solve_weighted_llc(d, 0.0))), "active frames")
for lam in (1e-4, 1e-2, 1.0, 100.0):
    print(f"lambda = {lam:>6g}: {len(activated_frames(solve_weighted_llc(d, lam))):2d} active frames")

# the search walks lambda upwards until it hits the requested count
lam, res = adjust_lambda(d, 10)
print(f"\nsearch for 10 frames: lambda = {lam:.6g}, count = {res.count}, "
      f"exact = {res.exact}, {res.iterations} probes, stop = {res.stop_reason}")

# Descriptor-shaped frames are much more alike. Here the count never falls
# below n however large lambda gets; the search proves this and stops, and
# the sampler keeps the frames with the largest coefficients instead.
corpus = make_corpus(300, seed=0, scene_cuts=2)
d = build_dictionary(corpus.features, corpus.weights)
lam, res = adjust_lambda(d, 15)
print(f"\n446 x 300 descriptors: count {res.count} at lambda {lam:g}, stop = {res.stop_reason}")
picked = sample_segment(corpus.features, corpus.weights, 15, trim=True)
print("kept after ranking by |alpha|:", picked.selected.tolist())
