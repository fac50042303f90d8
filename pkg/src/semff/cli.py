"""Command-line entry point.

Subcommands::

    semff run       frames or features -> selection, report, CSV series
    semff describe  frames -> features, flows, weights, scores, histograms
    semff sample    feature file -> selection (no frames needed)
    semff evaluate  metrics of an external selection
    semff synth     write a synthetic corpus

Exit codes: 0 ok, 1 usage, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .ingest import InputError
from .metrics import evaluate_selection
from .pipeline import (PipelineError, compare_uniform, describe_only, load_inputs, load_selection,
                       plan_segments, run_pipeline)
from .synth import make_corpus, render_video, write_corpus, write_video

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("semff")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _weights(text: str):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers, e.g. 0.1,1.0")
    return lo, hi


def _range(text: str):
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected start,end")
    return a, b


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON config file; flags override its values")
    p.add_argument("--input", help="directory of frames (.png/.ppm, numeric names)")
    p.add_argument("--features", help="feature matrix file (.bin or .csv), f x n")
    p.add_argument("--detections", help="detections JSONL")
    p.add_argument("--scores", help="per-frame semantic scores (.txt/.npy)")
    p.add_argument("--histograms", help="per-frame color histograms, (3*bins) x n feature file")
    p.add_argument("--weights-file", help="per-frame locality weights (.txt/.npy)")
    p.add_argument("--speedup", type=float, help="required speed-up (default 10)")
    p.add_argument("--spf", type=int, help="oversparsification factor (default 2)")
    p.add_argument("--weights", type=_weights, help="low,high locality weights (default 0.1,1.0)")
    p.add_argument("--tau", type=float, help="activation threshold ratio (default 1e-3)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker threads (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semff", description="Semantic fast-forward frame selection")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="full pipeline")
    _common(p)
    p.add_argument("--export-frames", action="store_true", help="copy selected frames to OUT/frames")

    p = sub.add_parser("describe", help="features only")
    _common(p)

    p = sub.add_parser("sample", help="sample from a feature file")
    _common(p)

    p = sub.add_parser("evaluate", help="metrics on an external selection")
    _common(p)
    p.add_argument("--selection", required=True, help="selection .txt (one index per line) or .json")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000, help="number of frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burst", type=_range, help="start,end of a semantic burst")
    p.add_argument("--abrupt", type=int, default=0, help="number of head-turn intervals")
    p.add_argument("--speedup", type=float, default=10.0)
    p.add_argument("--frames", action="store_true", help="render image frames instead of features")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args):
    overrides = {k: getattr(args, k, None) for k in
                 ("input", "features", "detections", "scores", "histograms", "weights_file",
                  "speedup", "spf", "tau", "out", "workers")}
    if getattr(args, "weights", None):
        overrides["weight_low"], overrides["weight_high"] = args.weights
    if getattr(args, "export_frames", False):
        overrides["export_frames"] = True
    return load_config(args.config, **overrides)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _run(cfg) -> int:
    result = run_pipeline(cfg)
    rep = result.report.to_dict()
    rep.pop("segments", None)
    _print({"selected": int(len(result.selection)), "report": rep,
            "segments": [s.to_dict() for s in result.plan.segments]})
    return EXIT_OK


def cmd_run(args) -> int:
    return _run(_config(args))


def cmd_sample(args) -> int:
    cfg = _config(args)
    if not cfg.features:
        raise InputError("sample needs --features")
    # frames are ignored here even if the config names them
    return _run(replace(cfg, input=None, export_frames=False))


def cmd_describe(args) -> int:
    info = describe_only(_config(args))
    _print(info)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    inputs = load_inputs(cfg)
    sel = load_selection(args.selection)
    if len(sel) == 0:
        raise InputError("selection is empty")
    if np.any(np.diff(sel) <= 0) or sel[0] < 0 or sel[-1] >= inputs.n:
        raise InputError("selection must be strictly increasing indices within the video")
    profile, plan = plan_segments(inputs, cfg)
    rep = evaluate_selection(sel, inputs.n, cfg.speedup, scores=profile.score, frames=inputs.frames,
                             appearance=inputs.appearance, window=cfg.instability_window)
    out = {"report": rep.to_dict(), "uniform": compare_uniform(cfg, inputs).to_dict()}
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / "evaluation.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    _print(out)
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.frames:
        frames, dets = render_video(args.n, args.seed, burst=args.burst)
        write_video(frames, dets, out)
        _print({"frames": str(out / "frames"), "detections": str(out / "detections.jsonl")})
    else:
        corpus = make_corpus(args.n, args.seed, burst=args.burst, abrupt_count=args.abrupt)
        paths = write_corpus(corpus, out, args.speedup)
        _print({**paths, "config": str(out / "config.toml"), "intervals": corpus.intervals})
    return EXIT_OK


COMMANDS = {"run": cmd_run, "describe": cmd_describe, "sample": cmd_sample,
            "evaluate": cmd_evaluate, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        if isinstance(exc.cause, (InputError, ConfigError, FileNotFoundError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
