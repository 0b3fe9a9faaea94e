"""Command-line entry point: ``atomdrift {gen,encode,learn,monitor,report}``.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import pipeline
from .dictionary import load_dictionary
from .encoder import StopCondition, encode
from .errors import AtomDriftError, ConfigError
from .signal_io import FORMATS, ManifestEntry, Signal, add_manifest_entry, load_signal, write_signal
from .synth import PRESET_LABELS, PRESETS, gen_rig_signal, preset_config

logger = logging.getLogger("atomdrift")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _optional_float(s: str):
    return None if s.lower() == "none" else float(s)


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rig = preset_config(args.preset, args.load, args.seed, args.noise_sigma, args.sample_rate)
    sig = gen_rig_signal(rig, args.seconds)
    name = f"{args.preset}_load{args.load}_seed{args.seed}"
    path = out / f"{name}.f64"
    write_signal(sig, path, "raw-f64le")
    add_manifest_entry(ManifestEntry(name, path, "raw-f64le", sig.sample_rate, PRESET_LABELS[args.preset]),
                       out / "manifest.ini")
    print(path)
    return 0


def cmd_encode(args) -> int:
    sig = load_signal(args.signal, args.format, args.sample_rate)
    dictionary = load_dictionary(args.dict)
    try:
        stop = StopCondition(args.max_events_per_sample, args.min_srr_db)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = encode(sig, dictionary, stop)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "atom_id", "shift", "amplitude"])
        w.writerows([0, e.atom_id, e.shift, pipeline._fmt(e.amplitude)] for e in result.events)
    write_signal(Signal(result.residual, sig.sample_rate), out / "residual.f64", "raw-f64le")
    print(f"events={result.n_events} srr_db={result.srr_db:.6f} "
          f"events_per_sample={result.events_per_sample:.6f}")
    return 0


_RUN_FLAGS = {
    "manifest": "manifest", "schedule": "schedule", "seed_signal": "seed_signal", "seed_dict": "seed_dict",
    "eta": "eta", "min_srr_db": "min_srr_db", "max_events_per_sample": "max_events_per_sample",
    "delta_seconds": "delta", "report_interval": "report_interval", "event_rate_window": "event_rate_window",
    "window_len": "window_len", "atoms": "n_atoms", "atom_len": "atom_len",
}


def _run_config(args) -> pipeline.RunConfig:
    overrides = {}
    for flag, key in _RUN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = str(v) if not isinstance(v, str) else v
    text = Path(args.config).read_text() if args.config else ""
    return pipeline.RunConfig.from_ini(text, overrides)


def cmd_learn(args) -> int:
    out = Path(args.out)
    if args.resume:
        cfg = pipeline.load_run_config(out)
    else:
        cfg = _run_config(args)
    summary = pipeline.run_learning(cfg, out, resume=args.resume, max_windows=args.max_windows)
    print(f"windows={summary.windows_processed} reports={summary.reports} out={out}")
    return 0


def cmd_monitor(args) -> int:
    overrides = {"delta": args.delta_seconds, "alert_threshold": args.alert_threshold}
    reports = pipeline.recompute_monitor(args.run_dir, overrides)
    out = Path(args.out) if args.out else Path(args.run_dir) / "monitor_replay.csv"
    pipeline.write_monitor_csv(reports, out)
    print(out)
    return 0


def cmd_report(args) -> int:
    for p in pipeline.write_reports(args.run_dir):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="atomdrift", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="synthesize a rig signal")
    g.add_argument("--preset", choices=PRESETS, default="baseline")
    g.add_argument("--seconds", type=float, default=60.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--load", type=int, default=0, choices=range(4))
    g.add_argument("--noise-sigma", type=float, default=0.05)
    g.add_argument("--sample-rate", type=int, default=12000)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("encode", help="matching-pursuit decomposition of one signal file")
    e.add_argument("signal")
    e.add_argument("--dict", required=True)
    e.add_argument("--format", choices=FORMATS, default="raw-f64le")
    e.add_argument("--sample-rate", type=int, default=12000)
    e.add_argument("--min-srr-db", type=_optional_float, default=12.0)
    e.add_argument("--max-events-per-sample", type=_optional_float, default=0.1)
    e.add_argument("--out", default=".")
    e.set_defaults(func=cmd_encode)

    ln = sub.add_parser("learn", help="run staged dictionary learning with monitoring")
    ln.add_argument("--config")
    ln.add_argument("--out", required=True)
    ln.add_argument("--resume", action="store_true", help="continue from the newest snapshot in --out")
    ln.add_argument("--max-windows", type=int)
    ln.add_argument("--manifest")
    ln.add_argument("--schedule", help='e.g. "BL:300,IR7:300,IR14:300"')
    ln.add_argument("--seed-signal", type=int)
    ln.add_argument("--seed-dict", type=int)
    ln.add_argument("--eta", type=float)
    ln.add_argument("--min-srr-db")
    ln.add_argument("--max-events-per-sample")
    ln.add_argument("--delta-seconds", type=float)
    ln.add_argument("--report-interval", type=float)
    ln.add_argument("--event-rate-window", type=float)
    ln.add_argument("--window-len", type=int)
    ln.add_argument("--atoms", type=int)
    ln.add_argument("--atom-len", type=int)
    ln.set_defaults(func=cmd_learn)

    m = sub.add_parser("monitor", help="recompute monitor reports from a run directory")
    m.add_argument("run_dir")
    m.add_argument("--delta-seconds", type=float)
    m.add_argument("--alert-threshold", type=float)
    m.add_argument("--out")
    m.set_defaults(func=cmd_monitor)

    r = sub.add_parser("report", help="write figure/table data files for a run")
    r.add_argument("run_dir")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AtomDriftError as exc:
        print(f"atomdrift: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"atomdrift: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"atomdrift: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
