"""
Splitting a video into semantic and non-semantic parts
======================================================

Frames with large, confident, central detections score high. The smoothed
score is thresholded at its mean, short runs are merged into their
neighbours, and each kind of segment gets its own speed-up so that the
whole video still plays at the requested rate.
"""
import numpy as np

from semff.ingest import Detection
from semff.semantics import allocate_speedups, build_profile, segment_profile, semantic_score

frame = (64, 48)
print("empty frame:          ", semantic_score([], frame))
print("centered quarter box: ", semantic_score([Detection(0, 0.5, (16, 12, 32, 24))], frame))
print("same box off center:  ", round(semantic_score([Detection(0, 0.5, (32, 12, 32, 24))], frame), 4))

# 2000 frames with one busy stretch in the middle
rng = np.random.default_rng(1)
scores = 0.01 * rng.random(2000)
scores[700:1100] += 0.3 + 0.05 * rng.random(400)

profile = build_profile(scores)
segments = segment_profile(profile)
plan = allocate_speedups(segments, 10.0)

print(f"\nsemantic speed-up {plan.speedup_semantic:.3f}, other {plan.speedup_non_semantic:.3f}")
for s in plan.segments:
    print(f"  [{s.start:4d}, {s.end:4d})  {s.kind:<13} speed-up {s.speedup:7.3f}  keep {s.target_frames} frames")
print("total kept:", plan.total_target, "of", len(scores))
