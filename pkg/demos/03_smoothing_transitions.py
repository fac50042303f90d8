"""
Filling the shakiest gaps
=========================

A sparse selection tends to bunch frames together and leave long jumps in
between. The smoothing pass repeatedly finds the transition with the worst
mix of appearance change and gap error, and inserts the frame that best
splits it. Appearance change is the earth mover's distance between color
histograms.
"""
import numpy as np

from semff.metrics import appearance_cost_cv
from semff.sft import AppearanceModel, SelectionTimeline, smooth_transitions
from semff.synth import make_corpus, oversampled_selection

n, S = 600, 10.0
corpus = make_corpus(n, seed=4, scene_cuts=0)
appearance = AppearanceModel(corpus.histograms)

start = oversampled_selection(n, 30, seed=4)
timeline = SelectionTimeline(start, 0, n, S, appearance)
print("start:", len(timeline), "frames, gaps", np.diff(timeline.indices).tolist())
print(f"CV of transition costs: {appearance_cost_cv(timeline):.3f}")

smoothed = smooth_transitions(timeline, int(n / S))
print("\nafter:", len(smoothed), "frames, gaps", np.diff(smoothed.indices).tolist())
print(f"CV of transition costs: {appearance_cost_cv(smoothed):.3f}")
print(f"largest instability before {timeline.instability_series().max():.3f}, "
      f"after {smoothed.instability_series().max():.3f}")
