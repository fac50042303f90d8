"""End-to-end orchestration: inputs -> segments -> sparse sampling -> smoothing -> metrics."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .config import PipelineConfig
from .descriptor import (FlowField, _block_edges, abrupt_motion_mask, compute_dense_flow,
                         cumulative_displacement_curves, describe_frame, extend_to_frames)
from .ingest import (DetectionSet, FrameSequence, InputError, load_detections, load_feature_matrix,
                     load_flow_grid, load_frame_sequence, load_vector, save_feature_matrix,
                     save_flow_grid, write_image)
from .metrics import EvaluationReport, evaluate_selection, instability_series
from .sampler import sample_segment
from .semantics import (SegmentPlan, allocate_speedups, build_profile, segment_profile,
                        semantic_score)
from .sft import AppearanceModel, SelectionTimeline, smooth_transitions, write_transitions_csv

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineInputs:
    """Everything the sampling stages need, already in memory.

    ``features`` is f x n. ``scores``, ``weights`` and ``appearance`` are
    optional: missing scores mean no semantics, missing weights mean
    ``weight_high`` everywhere, missing appearance means unit transition cost.
    """

    features: np.ndarray
    scores: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    appearance: Optional[AppearanceModel] = None
    frames: Optional[FrameSequence] = None
    flows: Optional[list] = None
    fingerprints: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.features.shape[1]


@dataclass
class SegmentResult:
    segment: object
    lam: float
    sampled: np.ndarray
    timeline: SelectionTimeline
    activation: object

    def to_dict(self) -> dict:
        s = self.segment
        return {"segment": [s.start, s.end], "kind": s.kind, "speedup": s.speedup,
                "target": s.target_frames, "lambda": self.lam,
                "sampled": [int(i) for i in self.sampled],
                "indices": [int(i) for i in self.timeline.indices],
                "activation": {k: v for k, v in self.activation.to_dict().items() if k != "indices"}}


@dataclass
class RunManifest:
    config: dict
    inputs: dict
    timings_ms: dict
    versions: dict
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "inputs": self.inputs, "timings_ms": self.timings_ms,
                "versions": self.versions, "outputs": self.outputs}


@dataclass
class PipelineResult:
    plan: SegmentPlan
    segments: list
    report: EvaluationReport
    manifest: RunManifest
    inputs: PipelineInputs

    @property
    def selection(self) -> np.ndarray:
        return np.concatenate([r.timeline.indices for r in self.segments])


class _Timer:
    def __init__(self):
        self.ms = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            self.ms[name] = self.ms.get(name, 0.0) + 1e3 * (time.perf_counter() - t0)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def compute_flows(frames: FrameSequence, block: int = 8, radius: int = 7, workers: int = 1) -> list:
    pairs = range(frames.n - 1)
    return _map(lambda i: compute_dense_flow(frames[i], frames[i + 1], block, radius), pairs, workers)


def flows_from_grid(dx: np.ndarray, dy: np.ndarray, width: int, height: int, block: int) -> list:
    re, ce = _block_edges(height, block), _block_edges(width, block)
    if dx.shape[1:] != (len(re) - 1, len(ce) - 1):
        raise InputError("flow cache grid does not match the frame size / block size")
    return [FlowField(dx[k], dy[k], re, ce) for k in range(len(dx))]


def describe_frames(frames: FrameSequence, flows: list, detections: DetectionSet,
                    normalize: bool = False, workers: int = 1) -> np.ndarray:
    """446 x n feature matrix. Frame ``i`` uses the flow towards ``i + 1`` (the last frame reuses the previous one)."""
    def one(i):
        flow = flows[min(i, len(flows) - 1)]
        return describe_frame(frames[i], flow, detections[i], i, normalize).vector
    return np.stack(_map(one, range(frames.n), workers), axis=1)


def motion_weights(flows: list, n: int, config: PipelineConfig) -> np.ndarray:
    if len(flows) < 2:
        return np.full(n, config.weight_high)
    profile = cumulative_displacement_curves(flows, config.cdc_window)
    _, w = abrupt_motion_mask(profile, config.weight_low, config.weight_high)
    return extend_to_frames(w, n)


def load_inputs(config: PipelineConfig, timer: Optional[_Timer] = None) -> PipelineInputs:
    """Read every input named in ``config`` and derive features/weights/scores."""
    timer = timer or _Timer()
    fp = {}
    frames = flows = None
    with timer.stage("ingest"):
        if config.input:
            frames = load_frame_sequence(config.input)
            fp["frames"] = {"n": frames.n, "width": frames.width, "height": frames.height,
                            "sha256": hashlib.sha256(b"".join(f.tobytes() for f in frames.frames)).hexdigest()}
        features = None
        if config.features:
            features = load_feature_matrix(config.features)
            fp["features"] = {"f": features.shape[0], "n": features.shape[1], "sha256": _sha256(config.features)}
        if frames is None and features is None:
            raise InputError("either input frames or a feature file is required")
        n = frames.n if frames is not None else features.shape[1]
        if features is not None and features.shape[1] != n:
            raise InputError(f"feature file has {features.shape[1]} columns, video has {n} frames")
        detections = None
        if config.detections:
            size = (frames.width, frames.height) if frames is not None else None
            detections = load_detections(config.detections, n, size)
            fp["detections"] = {"sha256": _sha256(config.detections)}
        for key in ("scores", "weights_file", "histograms"):
            path = getattr(config, key)
            if path:
                fp[key] = {"sha256": _sha256(path)}

    if frames is not None and (features is None or not config.weights_file):
        with timer.stage("flow"):
            cache = config.flows
            if cache:
                dx, dy = load_flow_grid(cache)
                flows = flows_from_grid(dx, dy, frames.width, frames.height, config.flow_block)
            else:
                flows = compute_flows(frames, config.flow_block, config.flow_radius, config.workers)

    with timer.stage("descriptor"):
        if features is None:
            features = describe_frames(frames, flows, detections or DetectionSet.empty(n),
                                       config.normalize_blocks, config.workers)
        if config.weights_file:
            weights = load_vector(config.weights_file)
            if len(weights) != n:
                raise InputError(f"weights file has {len(weights)} values, expected {n}")
        elif flows is not None:
            weights = motion_weights(flows, n, config)
        else:
            weights = np.full(n, config.weight_high)

    with timer.stage("semantics_input"):
        scores = None
        if config.scores:
            scores = load_vector(config.scores)
            if len(scores) != n:
                raise InputError(f"scores file has {len(scores)} values, expected {n}")
        elif detections is not None:
            if frames is not None:
                dims = (frames.width, frames.height)
            else:
                raise InputError("scoring detections needs frame dimensions; pass frames or a scores file")
            scores = np.array([semantic_score(d, dims) for d in detections])
        appearance = None
        if frames is not None:
            appearance = AppearanceModel.from_frames(frames.frames, config.color_bins)
        elif config.histograms:
            H = np.asarray(load_feature_matrix(config.histograms), dtype=np.float64)
            if H.shape[1] != n or H.shape[0] % 3:
                raise InputError("histogram file must be (3*bins) x n")
            appearance = AppearanceModel(H.T.reshape(n, 3, -1))
    return PipelineInputs(np.asarray(features), scores, weights, appearance, frames, flows, fp)


def _redistribute(deficit: int, capacity: np.ndarray) -> np.ndarray:
    # largest-remainder split proportional to capacity
    total = capacity.sum()
    if total <= 0 or deficit <= 0:
        return np.zeros_like(capacity)
    share = min(deficit, total) * capacity / total
    extra = np.floor(share).astype(int)
    rem = int(min(deficit, total) - extra.sum())
    for k in np.argsort(-(share - extra), kind="stable")[:rem]:
        extra[k] += 1
    return np.minimum(extra, capacity)


def sample_and_smooth(inputs: PipelineInputs, plan: SegmentPlan, config: PipelineConfig,
                      timer: Optional[_Timer] = None) -> list:
    """Per segment: sparse sampling at ``spf`` times the speed-up, then smoothing up to the target."""
    timer = timer or _Timer()
    appearance = inputs.appearance or AppearanceModel()
    weights = inputs.weights if inputs.weights is not None else np.full(inputs.n, config.weight_high)

    def sample(seg):
        D = np.asarray(inputs.features[:, seg.start:seg.end], dtype=np.float64)
        first = max(1, int(round(seg.target_frames / config.spf)))
        return sample_segment(D, weights[seg.start:seg.end], first, config.tau, trim=True)

    with timer.stage("sampling"):
        acts = _map(sample, plan.segments, config.workers)

    with timer.stage("smoothing"):
        results = []
        for seg, act in zip(plan.segments, acts):
            sampled = act.selected + seg.start
            tl = SelectionTimeline(sampled, seg.start, seg.end, seg.speedup, appearance)
            tl = smooth_transitions(tl, seg.target_frames, widen=True)
            results.append(SegmentResult(seg, act.lam, sampled, tl, act))
        deficit = sum(r.segment.target_frames - len(r.timeline) for r in results)
        if deficit > 0:
            log.warning("%d frames could not be placed in their segments; redistributing", deficit)
            capacity = np.array([r.segment.length - len(r.timeline) for r in results])
            extra = _redistribute(deficit, capacity)
            for r, e in zip(results, extra):
                if e > 0:
                    r.timeline = smooth_transitions(r.timeline, len(r.timeline) + int(e), widen=True)
    return results


def plan_segments(inputs: PipelineInputs, config: PipelineConfig) -> tuple:
    scores = inputs.scores if inputs.scores is not None else np.zeros(inputs.n)
    profile = build_profile(scores, config.profile_window)
    segs = segment_profile(profile, config.min_segment_length)
    plan = allocate_speedups(segs, config.speedup, config.speedup_min, config.speedup_cap_factor)
    return profile, plan


def run_arrays(inputs: PipelineInputs, config: PipelineConfig, timer: Optional[_Timer] = None) -> PipelineResult:
    """Run the sampling stages on in-memory inputs (no files written)."""
    timer = timer or _Timer()
    with timer.stage("semantics"):
        profile, plan = plan_segments(inputs, config)
    results = sample_and_smooth(inputs, plan, config, timer)
    with timer.stage("metrics"):
        selection = np.concatenate([r.timeline.indices for r in results])
        report = evaluate_selection(selection, inputs.n, config.speedup, scores=profile.score,
                                    frames=inputs.frames, appearance=inputs.appearance,
                                    window=config.instability_window, segments=plan.segments)
    manifest = RunManifest(config=config.to_dict(), inputs=inputs.fingerprints, timings_ms=timer.ms,
                           versions=_versions())
    return PipelineResult(plan, results, report, manifest, inputs)


def _versions() -> dict:
    return {"semff": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def uniform_selection(n: int, S: float) -> np.ndarray:
    """Every ``S``-th frame: ``floor(k * S)`` for ``k < floor(n / S)``."""
    m = max(1, int(np.floor(n / S)))
    return np.floor(np.arange(m) * S).astype(int)


def compare_uniform(config: PipelineConfig, inputs: Optional[PipelineInputs] = None) -> EvaluationReport:
    """Metrics of the uniform every-S-th-frame selection on the same inputs."""
    inputs = inputs or load_inputs(config)
    sel = uniform_selection(inputs.n, config.speedup)
    scores = inputs.scores if inputs.scores is not None else np.zeros(inputs.n)
    return evaluate_selection(sel, inputs.n, config.speedup, scores=scores, frames=inputs.frames,
                              appearance=inputs.appearance, window=config.instability_window)


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def export_selection(result: PipelineResult, out_dir, frames: Optional[FrameSequence] = None) -> list:
    """Write ``selection.txt`` (one index per line), ``selection.json`` and,
    when ``frames`` is given, the selected images as ``frames/000000.png``..."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    sel = result.selection
    txt = out / "selection.txt"
    txt.write_text("".join(f"{int(i)}\n" for i in sel), encoding="utf-8")
    written.append(txt)
    js = out / "selection.json"
    _dump_json(js, {"n_original": result.inputs.n, "segments": [r.to_dict() for r in result.segments]})
    written.append(js)
    if frames is not None:
        fdir = out / "frames"
        fdir.mkdir(exist_ok=True)
        for k, i in enumerate(sel):
            p = fdir / f"{k:06d}.png"
            write_image(p, frames[int(i)])
            written.append(p)
    return written


def load_selection(path) -> np.ndarray:
    """Read a selection written by :func:`export_selection` (``.txt`` or ``.json``)."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        return np.array([i for seg in data["segments"] for i in seg["indices"]], dtype=int)
    return np.loadtxt(path, dtype=int, ndmin=1)


def write_outputs(result: PipelineResult, config: PipelineConfig, uniform: Optional[EvaluationReport] = None) -> list:
    """Write every artifact of a run into ``config.out``; removes partial outputs on failure."""
    out = Path(config.out)
    written = []
    try:
        frames = result.inputs.frames if config.export_frames else None
        written += export_selection(result, out, frames)
        report = {"report": result.report.to_dict(), "plan": result.plan.to_dict(),
                  "settings": {"instability_window": config.instability_window,
                               "activation_tau": config.tau,
                               "semantic_threshold": "mean of smoothed profile"}}
        if uniform is not None:
            report["uniform"] = uniform.to_dict()
        p = out / "report.json"
        _dump_json(p, report)
        written.append(p)
        appearance = result.inputs.appearance or AppearanceModel()
        sel = result.selection
        sp = np.concatenate([np.full(len(r.timeline), r.segment.speedup) for r in result.segments])[1:]
        p = out / "transitions.csv"
        write_transitions_csv(p, sel, appearance, sp)
        written.append(p)
        if result.inputs.frames is not None and len(sel) >= config.instability_window:
            series = instability_series([result.inputs.frames[i] for i in sel], config.instability_window)
            p = out / "instability.csv"
            p.write_text("window,instability\n" + "".join(f"{k},{float(v)!r}\n" for k, v in enumerate(series)))
            written.append(p)
        result.manifest.outputs = {str(q.relative_to(out)): _sha256(q) for q in written}
        p = out / "manifest.json"
        _dump_json(p, result.manifest.to_dict())
        written.append(p)
    except BaseException:
        for q in written:
            q.unlink(missing_ok=True)
        if (out / "frames").is_dir() and not any((out / "frames").iterdir()):
            shutil.rmtree(out / "frames")
        raise
    return written


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage named by ``config`` and, if ``config.out`` is set, write the artifacts."""
    timer = _Timer()
    inputs = load_inputs(config, timer)
    result = run_arrays(inputs, config, timer)
    if config.out:
        with timer.stage("compare_uniform"):
            uniform = compare_uniform(config, inputs)
        with timer.stage("export"):
            write_outputs(result, config, uniform)
    return result


def describe_only(config: PipelineConfig) -> dict:
    """Compute and persist features, flows, weights, scores and histograms for a frame directory."""
    if not config.input or not config.out:
        raise InputError("describe needs --input and --out")
    timer = _Timer()
    cfg = replace(config, features=None, weights_file=None)
    inputs = load_inputs(cfg, timer)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    save_feature_matrix(out / "features.bin", inputs.features)
    if inputs.flows:
        save_flow_grid(out / "flows.bin", np.stack([f.dx for f in inputs.flows]),
                       np.stack([f.dy for f in inputs.flows]))
    np.savetxt(out / "weights.txt", inputs.weights, fmt="%.17g")
    if inputs.scores is not None:
        np.savetxt(out / "scores.txt", inputs.scores, fmt="%.17g")
    if inputs.appearance is not None and inputs.appearance.cdf is not None:
        hist = np.diff(inputs.appearance.cdf, axis=-1, prepend=0.0)
        save_feature_matrix(out / "histograms.bin", hist.reshape(inputs.n, -1).T)
    return {"n": inputs.n, "timings_ms": timer.ms}
