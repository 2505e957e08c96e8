"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import checkpoint, metrics, mot_io, synth
from .autodiff import NonFiniteError
from .config import ConfigError, ConfigProfile, apply_overrides, format_profile, load_profile, with_cost_profile
from .association import COST_PROFILES
from .kalman import KalmanError
from .model import ModelParams
from .tracker import make_predictor, run_sequence
from .training import TrainingError, gather_segments, train

log = logging.getLogger("histrack")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SWEEP_AXES = ("T", "p", "cost", "iou_threshold")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------


def resolve_profile(args) -> ConfigProfile:
    try:
        p = load_profile(args.profile)
    except ConfigError as exc:
        if Path(args.profile).exists():
            raise DataError(str(exc)) from None
        raise UsageError(str(exc)) from None
    items = []
    for kv in getattr(args, "set", None) or []:
        key, sep, value = kv.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        items.append((key.strip(), value.strip()))
    if getattr(args, "seed", None) is not None:
        items.append(("train.seed", str(args.seed)))
    if getattr(args, "predictor", None):
        items.append(("predictor", args.predictor))
    try:
        p = apply_overrides(p, items, "--set")
        if getattr(args, "cost_profile", None):
            p = with_cost_profile(p, args.cost_profile)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    return p


def _sequences(root: Path, marker: str) -> list[Path]:
    if not root.is_dir():
        raise UsageError(f"not a directory: {root}")
    seqs = mot_io.find_sequences(root, marker)
    if not seqs:
        raise DataError(f"no sequence with {marker} under {root}")
    return seqs


def _load_model(path: str | None, profile: ConfigProfile) -> ModelParams:
    if not path:
        raise UsageError("the transformer predictor needs --checkpoint")
    if not Path(path).is_file():
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return ModelParams.from_arrays(profile.model, checkpoint.load(path))
    except (checkpoint.CheckpointError, KeyError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _train_model(gt_root: Path, profile: ConfigProfile):
    track_sets = [mot_io.read_ground_truth(s) for s in _sequences(gt_root, "gt/gt.txt")]
    data = gather_segments(track_sets, profile.T)
    if len(data) == 0:
        raise DataError(f"no trajectory in {gt_root} is longer than T={profile.T}")
    model = ModelParams.init(profile.model, profile.train.seed)
    log.info("training on %d segments", len(data))
    return train(data, model, profile.train)


def _track_all(det_root: Path, profile: ConfigProfile, model: ModelParams | None, out_dir: Path) -> list[Path]:
    written = []
    for seq in _sequences(det_root, "det/det.txt"):
        name, n_frames, dims = mot_io.read_seqinfo(seq)
        dets = mot_io.read_detections(seq)
        predictor = make_predictor(profile.predictor, model, profile.kalman)
        hyp = run_sequence(dets, predictor, profile.T, profile.assoc, profile.lifecycle, n_frames=n_frames or None)
        path = out_dir / f"{seq.name}.txt"
        mot_io.write_results(path, hyp, dims)
        written.append(path)
    return written


def _evaluate_all(gt_root: Path, res_dir: Path, match_iou: float = 0.5) -> list[tuple[str, metrics.EvalReport]]:
    rows = []
    for seq in _sequences(gt_root, "gt/gt.txt"):
        _, _, dims = mot_io.read_seqinfo(seq)
        res = res_dir / f"{seq.name}.txt"
        if not res.is_file():
            raise DataError(f"missing result file {res}")
        rows.append((seq.name, metrics.evaluate(mot_io.read_ground_truth(seq), mot_io.read_results(res, dims), match_iou)))
    return rows


def _write_report(rows, out_dir: Path | None) -> None:
    if len(rows) > 1:
        rows = rows + [("COMBINED", metrics.combine([r for _, r in rows]))]
    text = metrics.format_report(rows)
    if out_dir is None:
        sys.stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(text)
    (out_dir / "report.csv").write_text(metrics.format_csv(rows))
    sys.stdout.write(text)


# -- commands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.scenario in ("dance-toy", "linear-toy"):
        seed = args.seed or 0
        s = synth.dance_toy(seed) if args.scenario == "dance-toy" else synth.linear_toy(seed)
    else:
        path = Path(args.scenario)
        if not path.is_file():
            raise UsageError(f"scenario file not found: {path}")
        try:
            s = synth.load_scenario(path)
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}: {exc}") from None
        if args.seed is not None:
            s = replace(s, seed=args.seed)
    seq = mot_io.emit_mot_files(synth.generate(s), args.out)
    print(seq)
    return EXIT_OK


def cmd_train(args) -> int:
    profile = resolve_profile(args)
    result = _train_model(Path(args.gt_dir), profile)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out, result.params.arrays())
    out.with_name(out.name + ".trace.csv").write_text(result.trace_csv())
    out.with_name(out.name + ".profile").write_text(format_profile(profile))
    e, tr, va = result.trace[-1] if result.trace else (0, float("nan"), float("nan"))
    print(f"epochs {e}  loss {tr:.6f}  val {va:.6f}  -> {out}")
    return EXIT_OK


def cmd_track(args) -> int:
    profile = resolve_profile(args)
    model = _load_model(args.checkpoint, profile) if profile.predictor == "transformer" else None
    for path in _track_all(Path(args.det_dir), profile, model, Path(args.out)):
        print(path)
    return EXIT_OK


def cmd_eval(args) -> int:
    if not Path(args.results_dir).is_dir():
        raise UsageError(f"not a directory: {args.results_dir}")
    rows = _evaluate_all(Path(args.gt_dir), Path(args.results_dir), args.match_iou)
    _write_report(rows, Path(args.out) if args.out else None)
    return EXIT_OK


def _sweep_profiles(base: ConfigProfile, axis: str, values: Sequence[str]) -> list[tuple[str, ConfigProfile]]:
    out = []
    for v in values:
        try:
            if axis == "T":
                p = apply_overrides(base, [("model.T", v)])
            elif axis == "p":
                p = apply_overrides(base, [("train.p", v)])
            elif axis == "cost":
                p = with_cost_profile(base, v)
            else:
                p = apply_overrides(base, [("assoc.iou_threshold", v)])
        except ConfigError as exc:
            raise UsageError(f"sweep value {v!r}: {exc}") from None
        out.append((v, p))
    return out


def cmd_sweep(args) -> int:
    base = resolve_profile(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise UsageError("no sweep values")
    data_root, out_root = Path(args.data_dir), Path(args.out)
    retrain = base.predictor == "transformer" and args.axis in ("T", "p")
    if base.predictor == "transformer" and not args.train_dir and (retrain or not args.checkpoint):
        raise UsageError("the transformer sweep needs --train-dir (or --checkpoint for the cost and iou_threshold axes)")
    shared = None
    if base.predictor == "transformer" and not retrain:
        shared = _load_model(args.checkpoint, base) if args.checkpoint else _train_model(Path(args.train_dir), base).params
    summary = ["axis,value," + ",".join(metrics.REPORT_COLUMNS[1:])]
    for value, profile in _sweep_profiles(base, args.axis, values):
        run_dir = out_root / f"{args.axis}={value}"
        model = shared
        if retrain:
            model = _train_model(Path(args.train_dir), profile).params
            run_dir.mkdir(parents=True, exist_ok=True)
            checkpoint.save(run_dir / "model.ckpt", model.arrays())
        _track_all(data_root, profile, model, run_dir / "results")
        rows = _evaluate_all(data_root, run_dir / "results")
        _write_report(rows, run_dir)
        total = metrics.combine([r for _, r in rows])
        summary.append(total.csv_row(f"{args.axis},{value}"))
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "summary.csv").write_text("\n".join(summary) + "\n")
    print(out_root / "summary.csv")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="histrack", description="Transformer motion prediction for multi-object tracking.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, predictor=True):
        p.add_argument("--profile", default="toy", help="profile name (toy, paper) or profile file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a profile key")
        if predictor:
            p.add_argument("--predictor", choices=("transformer", "kalman"))
            p.add_argument("--cost-profile", choices=sorted(COST_PROFILES))

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("scenario", help="scenario file, or dance-toy / linear-toy")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the motion predictor on ground truth")
    p.add_argument("gt_dir")
    p.add_argument("--out", required=True, help="checkpoint path")
    common(p, predictor=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="run the tracker over detection files")
    p.add_argument("det_dir")
    p.add_argument("--checkpoint")
    p.add_argument("--out", required=True, help="results directory")
    common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score results against ground truth")
    p.add_argument("gt_dir")
    p.add_argument("results_dir")
    p.add_argument("--out", help="report directory (default: print only)")
    p.add_argument("--match-iou", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="track and score once per value of one axis")
    p.add_argument("axis", choices=SWEEP_AXES)
    p.add_argument("values", help="comma-separated values")
    p.add_argument("data_dir", help="sequences with det/ and gt/ to track and score")
    p.add_argument("--train-dir", help="ground truth to train on (transformer)")
    p.add_argument("--checkpoint")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"histrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, mot_io.MotFormatError, checkpoint.CheckpointError, ConfigError) as exc:
        print(f"histrack {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, TrainingError, KalmanError, FloatingPointError) as exc:
        print(f"histrack {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
