"""Command-line entry point.

    chewdetect synth         --out DIR
    chewdetect extract       --manifest M --out DIR
    chewdetect train         --manifest M --out model.json
    chewdetect loso          --manifest M --out DIR
    chewdetect detect        --wav W --model model.json --out events.csv
    chewdetect window-study  --manifest M --out grid.csv

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure
(e.g. SMO not converging).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .errors import ChewDetectError, ConvergenceError, ValidationError
from .fusion import CHANNEL_MODES
from .loso import (FoldModel, channels_for_mode, extract_dataset, fit_all, recording_data,
                   run_loso, score_recording, window_study, write_grid_csv)
from .postprocess import detect_events
from .signal_io import load_manifest, load_wav, write_intervals_csv
from .synth import SynthSpec, generate_dataset

log = logging.getLogger("chewdetect")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
CHANNEL_TAG = {0: "L", 1: "R"}


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n")


def _echo_config(out_dir: Path, config: RunConfig, extra: dict | None = None) -> None:
    d = {"config": config.to_dict()}
    if extra:
        d.update(extra)
    _dump_json(out_dir / "config_echo.json", d)


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, jobs=args.jobs, channel_mode=args.channel_mode,
                              threshold=args.threshold)


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_synth(args) -> int:
    fields = {"seed": args.seed if args.seed is not None else 0}
    if args.subjects is not None:
        fields["n_subjects"] = args.subjects
        fields["recordings_per_subject"] = 1
    if args.recordings_per_subject is not None:
        fields["recordings_per_subject"] = args.recordings_per_subject
    if args.duration is not None:
        fields["duration_s"] = args.duration
    if args.snr_db is not None:
        fields["snr_db"] = args.snr_db
    spec = SynthSpec(**fields)
    out = _out_dir(args.out)
    manifest = generate_dataset(spec, out)
    _dump_json(out / "synth_spec.json", spec.to_dict())
    print(manifest)
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    out = _out_dir(args.out)
    channels = channels_for_mode(cfg.channel_mode)
    data = extract_dataset(manifest, cfg, channels)
    for rec in data:
        for c in channels:
            path = out / f"{rec.recording_id}_{CHANNEL_TAG[c]}.csv"
            X, deg = rec.features[c], rec.degenerate[c]
            with open(path, "w") as fh:
                fh.write(",".join(("window_start_s",) + rec.names + ("degenerate", "label")) + "\n")
                for t, row, d, y in zip(rec.window_start_s, X, deg, rec.truth_labels):
                    vals = ",".join(f"{v:.9g}" for v in row)
                    fh.write(f"{t:.4f},{vals},{int(d)},{int(y)}\n")
    _echo_config(out, cfg, {"manifest": str(args.manifest)})
    print(f"wrote features for {len(data)} recording(s) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    data = extract_dataset(load_manifest(args.manifest), cfg)
    model = fit_all(data, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out, cfg)
    print(out)
    return EXIT_OK


def cmd_loso(args) -> int:
    cfg = _config(args)
    res = run_loso(load_manifest(args.manifest), cfg)
    out = _out_dir(args.out)
    _dump_json(out / "report.json", res.report)
    res.pr.to_csv(out / "pr_curve.csv")
    s = res.report["summary"]
    print(f"window F1 {s['window']['f1']['text']}  duration F1 {s['duration']['f1']['text']}  "
          f"PR AUC {res.pr.auc:.4f}")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    model = FoldModel.load(args.model)
    if args.channel_mode is None:
        cfg = cfg.with_overrides(channel_mode=model.mode)
    elif model.mode != cfg.channel_mode:
        raise ValidationError(f"model was trained for {model.mode!r}, config asks {cfg.channel_mode!r}")
    audio = load_wav(args.wav, expected_rate=cfg.sample_rate_hz)
    rec = recording_data(audio, None, cfg)
    scored = score_recording(model, rec, cfg)
    events = detect_events(scored.smoothed, cfg.window_size_s, cfg.threshold, cfg.aggregation,
                           duration_s=audio.duration_s)
    rows = [(float(a), float(b), name) for name in ("chew", "bout", "meal")
            for a, b in events[name].intervals]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_intervals_csv(out, rows)
    _dump_json(out.with_suffix(".config.json"), {"config": cfg.to_dict(), "wav": str(args.wav),
                                                  "model": str(args.model)})
    print(f"{len(events['meal'])} meal(s), {len(events['chew'])} chew(s) -> {out}")
    return EXIT_OK


def cmd_window_study(args) -> int:
    cfg = _config(args)
    grid = window_study(load_manifest(args.manifest), cfg, args.sizes, args.steps)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_grid_csv(out, grid)
    _dump_json(out.with_suffix(".config.json"), {"config": cfg.to_dict(), "sizes": args.sizes,
                                                  "steps": args.steps})
    best = max(grid.items(), key=lambda kv: kv[1]["mean"])
    print(f"best cell size={best[0][0]} step={best[0][1]} F1 {best[1]['text']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config (defaults fill omitted keys)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for recordings/folds")
    common.add_argument("--channel-mode", choices=CHANNEL_MODES)
    common.add_argument("--threshold", type=float, help="decision threshold on smoothed scores")
    common.add_argument("--out", required=True)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="chewdetect", description="Audio chewing detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--subjects", type=int)
    s.add_argument("--recordings-per-subject", type=int)
    s.add_argument("--duration", type=float, help="seconds per recording")
    s.add_argument("--snr-db", type=float)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("extract", cmd_extract, "write per-window feature CSVs"),
                                 ("train", cmd_train, "tune and train on a whole dataset"),
                                 ("loso", cmd_loso, "leave-one-subject-out evaluation")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--manifest", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("detect", parents=[common], help="detect chews/bouts/meals in one WAV")
    s.add_argument("--wav", required=True)
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("window-study", parents=[common], help="LOSO window F1 over size x step")
    s.add_argument("--manifest", required=True)
    s.add_argument("--sizes", type=float, nargs="+", default=[0.2, 0.4, 0.6])
    s.add_argument("--steps", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    s.set_defaults(func=cmd_window_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, ChewDetectError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
