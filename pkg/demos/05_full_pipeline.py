"""
From frames to a fast-forward selection
=======================================

This renders a short synthetic walk with a person in view for a while,
runs every stage on the image files, and compares the result with taking
every tenth frame. The same run is available from the shell as
``semff run --input <frames> --detections <file> --out <dir>``.
"""
import json
import tempfile
from pathlib import Path

from semff.config import PipelineConfig
from semff.pipeline import compare_uniform, run_pipeline
from semff.synth import render_video, write_video

work = Path(tempfile.mkdtemp(prefix="semff-demo-"))
frames, detections = render_video(400, seed=3, intervals=[(250, 300)], burst=(100, 160))
write_video(frames, detections, work / "video")

config = PipelineConfig(input=str(work / "video" / "frames"),
                        detections=str(work / "video" / "detections.jsonl"),
                        out=str(work / "out"), speedup=10.0)
result = run_pipeline(config)

print("segments:")
for s in result.plan.segments:
    print(f"  [{s.start:3d}, {s.end:3d}) {s.kind:<13} speed-up {s.speedup:6.3f}  {s.target_frames} frames")

ours = result.report
uniform = compare_uniform(config, result.inputs)
print(f"\n{'':>22}{'ours':>10}{'uniform':>10}")
print(f"{'frames kept':>22}{ours.n_selected:>10}{uniform.n_selected:>10}")
print(f"{'speed-up error':>22}{ours.speedup_deviation:>10.3f}{uniform.speedup_deviation:>10.3f}")
print(f"{'semantic retention':>22}{ours.semantic_retention:>10.3f}{uniform.semantic_retention:>10.3f}")
print(f"{'instability':>22}{ours.instability:>10.2f}{uniform.instability:>10.2f}")

print("\nwritten to", work / "out")
print(sorted(json.loads((work / "out" / "manifest.json").read_text())["outputs"]))
