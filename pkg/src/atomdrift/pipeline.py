"""Experiment runs: staged windowed learning with online monitoring.

A run directory holds::

    run.ini            resolved configuration (seeds included)
    stages.csv         label, start/end stream time and window range per stage
    events.csv         window, atom_id, shift, amplitude
    learning_log.csv   per-window encode statistics and per-atom update norms
    monitor.csv        per-report, per-atom evolution rate / center frequency / event rate
    snapshots/         w{ordinal:06d}.dict, dictionary after that many windows

``w000000.dict`` is the initial dictionary. Any snapshot is a valid resume
point: windows are addressed by ordinal, so a resumed run redraws exactly
the windows an uninterrupted run would have used.
"""
from __future__ import annotations

import configparser
import csv
import io
import logging
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dictionary import Dictionary, init_dictionary, load_dictionary, save_dictionary, take_snapshot
from .encoder import Event, StopCondition
from .errors import ConfigError, SignalError
from .learner import LearnConfig, learn_step
from .monitor import EventLog, Monitor, MonitorConfig, MonitorReport, dictionary_features, event_rate
from .signal_io import DEFAULT_WINDOW_LEN, Segment, WindowPlan, next_window, read_manifest
from .synth import LOAD_RPM, PRESET_LABELS, gen_rig_signal, preset_config

logger = logging.getLogger(__name__)

SNAPSHOT_RE = re.compile(r"w(\d{6,})\.dict$")


def _fmt(v: float) -> str:
    """17 significant digits: round-trips every double exactly."""
    return format(float(v), ".17g")


@dataclass
class RunConfig:
    # data
    manifest: Optional[str] = None
    synth_noise_sigma: float = 0.05
    synth_segment_seconds: float = 60.0
    window_len: int = DEFAULT_WINDOW_LEN
    sample_rate: int = 12000
    schedule: list[tuple[str, float]] = field(default_factory=lambda: [("BL", 300.0), ("IR7", 300.0),
                                                                       ("IR14", 300.0)])
    # dictionary
    n_atoms: int = 16
    atom_len: int = 50
    seed_dict: int = 0
    seed_signal: int = 0
    # pursuit
    min_srr_db: Optional[float] = 12.0
    max_events_per_sample: Optional[float] = 0.1
    # learning
    eta: float = 2e-6
    variance_floor: float = 1e-12
    # monitor
    delta: float = 600.0
    report_interval: float = 60.0
    event_rate_window: float = 1800.0
    alert_threshold: float = 0.1
    alert_hold: int = 2

    @property
    def window_seconds(self) -> float:
        return self.window_len / self.sample_rate

    def stop(self) -> StopCondition:
        try:
            return StopCondition(self.max_events_per_sample, self.min_srr_db)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def learn(self) -> LearnConfig:
        return LearnConfig(self.eta, self.variance_floor)

    def monitor(self) -> MonitorConfig:
        return MonitorConfig(self.delta, self.report_interval, self.event_rate_window,
                             self.alert_threshold, self.alert_hold)

    def validate(self) -> None:
        if not self.schedule:
            raise ConfigError("schedule is empty")
        for label, dur in self.schedule:
            if not dur > 0:
                raise ConfigError(f"stage {label!r} needs a positive duration")
        if self.window_len < self.atom_len:
            raise ConfigError("window_len shorter than atom_len")
        if self.n_atoms < 1 or self.atom_len < 2:
            raise ConfigError("need n_atoms >= 1 and atom_len >= 2")
        try:
            self.stop(), self.learn(), self.monitor()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- INI round trip ------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["run"] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "schedule":
                v = ", ".join(f"{lab}:{_fmt(d)}" for lab, d in v)
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = _fmt(v)
            cp["run"][f.name] = str(v)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, overrides: Optional[dict] = None) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        raw: dict = {}
        for section in cp.sections():
            raw.update(cp[section])
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        kwargs = {}
        types = {f.name: f for f in fields(cls)}
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, value, types[key].type)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def _coerce(key: str, value, type_name: str):
    if not isinstance(value, str):
        return value
    s = value.strip()
    try:
        if key == "schedule":
            stages = []
            for item in s.split(","):
                label, _, dur = item.strip().partition(":")
                stages.append((label.strip(), float(dur)))
            return stages
        if s.lower() == "none" and "Optional" in type_name:
            return None
        if "int" in type_name and "float" not in type_name:
            return int(s)
        if "float" in type_name:
            return float(s)
        return s
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


# -- data sources -------------------------------------------------------------

def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0])


def synth_segments(cfg: RunConfig, labels: Sequence[str]) -> dict[str, list[Segment]]:
    """One generated segment per load case for each stage label."""
    by_label = {v: k for k, v in PRESET_LABELS.items()}
    out = {}
    for label in labels:
        preset = by_label.get(label, label.lower())
        if preset not in PRESET_LABELS:
            raise ConfigError(f"no synthetic preset for stage {label!r}; use {sorted(by_label)} or a manifest")
        segs = []
        for load in range(len(LOAD_RPM)):
            seed = _derived_seed(cfg.seed_signal, list(PRESET_LABELS).index(preset), load)
            rig = preset_config(preset, load, seed, cfg.synth_noise_sigma, cfg.sample_rate)
            segs.append(Segment(label, gen_rig_signal(rig, cfg.synth_segment_seconds)))
        out[label] = segs
    return out


def manifest_segments(cfg: RunConfig) -> dict[str, list[Segment]]:
    out: dict[str, list[Segment]] = {}
    for entry in read_manifest(cfg.manifest):
        if entry.sample_rate != cfg.sample_rate:
            raise SignalError(f"segment {entry.name} is sampled at {entry.sample_rate} Hz, "
                              f"run expects {cfg.sample_rate} Hz")
        out.setdefault(entry.label, []).append(entry.load())
    return out


@dataclass(frozen=True)
class Stage:
    label: str
    start: float
    end: float
    first_window: int
    n_windows: int


def plan_stages(cfg: RunConfig) -> list[Stage]:
    stages, t, k = [], 0.0, 0
    for label, dur in cfg.schedule:
        n = max(1, int(round(dur / cfg.window_seconds)))
        stages.append(Stage(label, t, t + n * cfg.window_seconds, k, n))
        t += n * cfg.window_seconds
        k += n
    return stages


def window_plans(cfg: RunConfig, stages: Sequence[Stage],
                 segments: dict[str, list[Segment]]) -> list[WindowPlan]:
    plans = []
    for i, st in enumerate(stages):
        if st.label not in segments:
            raise ConfigError(f"no segments labelled {st.label!r}")
        seed = _derived_seed(cfg.seed_signal, 1_000_003, i)
        plans.append(WindowPlan(cfg.window_len, segments[st.label], seed, st.n_windows))
    return plans


# -- run --------------------------------------------------------------------------

def _snapshot_path(run_dir: Path, ordinal: int) -> Path:
    return run_dir / "snapshots" / f"w{ordinal:06d}.dict"


def list_snapshots(run_dir) -> list[tuple[int, Path]]:
    out = []
    for p in (Path(run_dir) / "snapshots").glob("w*.dict"):
        m = SNAPSHOT_RE.search(p.name)
        if m:
            out.append((int(m.group(1)), p))
    return sorted(out)


MONITOR_HEADER = ["stream_time", "atom_id", "evolution_rate", "center_freq_hz", "event_rate", "alert", "approximate"]


def _monitor_rows(rep: MonitorReport) -> list[list[str]]:
    alerts = set(rep.alerts)
    return [[_fmt(rep.stream_time), str(m), _fmt(rep.evolution_rate[m]), _fmt(rep.center_frequency_hz[m]),
             _fmt(rep.event_rate_per_s[m]), str(int(m in alerts)), str(int(rep.approximate))]
            for m in range(rep.n_atoms)]


def _learning_header(n_atoms: int) -> list[str]:
    return (["window", "stage", "stream_time", "n_events", "srr_db"]
            + [f"count_{m}" for m in range(n_atoms)] + [f"dphi_{m}" for m in range(n_atoms)])


def _truncate_csv(path: Path, keep) -> list[list[str]]:
    """Rewrite ``path`` keeping the header and rows where ``keep(row)``; return kept rows."""
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if keep(r)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
    return body


def read_events(run_dir) -> list[tuple[int, Event]]:
    with open(Path(run_dir) / "events.csv", newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        return [(int(r[0]), Event(int(r[1]), int(r[2]), float(r[3]))) for r in rd]


def load_run_config(run_dir) -> RunConfig:
    return RunConfig.from_ini((Path(run_dir) / "run.ini").read_text())


@dataclass
class RunSummary:
    run_dir: Path
    windows_processed: int
    final_dictionary: Dictionary
    reports: int


def run_learning(cfg: RunConfig, run_dir, resume: bool = False,
                 max_windows: Optional[int] = None,
                 segments: Optional[dict[str, list[Segment]]] = None) -> RunSummary:
    """Process the schedule window by window, writing all run files.

    ``max_windows`` stops after that many windows in total (counting any
    processed before a resume), which is how interruption is simulated.
    """
    cfg.validate()
    run_dir = Path(run_dir)
    stages = plan_stages(cfg)
    if segments is None:
        labels = [s.label for s in stages]
        segments = manifest_segments(cfg) if cfg.manifest else synth_segments(cfg, labels)
    plans = window_plans(cfg, stages, segments)
    total = stages[-1].first_window + stages[-1].n_windows
    stop, lcfg, mcfg = cfg.stop(), cfg.learn(), cfg.monitor()
    fs = cfg.sample_rate
    wsec = cfg.window_seconds
    monitor = Monitor(mcfg, cfg.n_atoms, fs)

    (run_dir / "snapshots").mkdir(parents=True, exist_ok=True)
    ev_path, log_path, mon_path = run_dir / "events.csv", run_dir / "learning_log.csv", run_dir / "monitor.csv"

    start = 0
    if resume and list_snapshots(run_dir):
        start, snap_path = list_snapshots(run_dir)[-1]
        dictionary = load_dictionary(snap_path)
        dictionary.updates = start
        t_start = start * wsec
        events = _truncate_csv(ev_path, lambda r: int(r[0]) < start)
        _truncate_csv(log_path, lambda r: int(r[0]) < start)
        mon_rows = _truncate_csv(mon_path, lambda r: float(r[0]) <= t_start + 1e-9)
        for k, p in list_snapshots(run_dir):
            if k > start:
                p.unlink()
            elif (start - k) * wsec <= monitor.buffer.retention + mcfg.report_interval:
                monitor.observe(take_snapshot(load_dictionary(p), k * wsec))
        for r in events:
            w, sh = int(r[0]), int(r[2])
            monitor.events.append(w * wsec, [Event(int(r[1]), sh, float(r[3]))], fs)
        for r in mon_rows:
            m = int(r[1])
            monitor.streaks[m] = monitor.streaks[m] + 1 if float(r[2]) > mcfg.alert_threshold else 0
        logger.info("resuming at window %d (t=%.3f s)", start, t_start)
    else:
        dictionary = init_dictionary(cfg.n_atoms, cfg.atom_len, cfg.seed_dict)
        (run_dir / "run.ini").write_text(cfg.to_ini())
        with open(run_dir / "stages.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "start", "end", "first_window", "n_windows"])
            for s in stages:
                w.writerow([s.label, _fmt(s.start), _fmt(s.end), s.first_window, s.n_windows])
        for p in (run_dir / "snapshots").glob("*.dict"):
            p.unlink()
        for path, header in ((ev_path, ["window", "atom_id", "shift", "amplitude"]),
                             (log_path, _learning_header(cfg.n_atoms)),
                             (mon_path, MONITOR_HEADER)):
            with open(path, "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(header)
        save_dictionary(dictionary, _snapshot_path(run_dir, 0))
        monitor.observe(take_snapshot(dictionary, 0.0))

    end = total if max_windows is None else min(total, max_windows)
    report_every = max(1, int(round(mcfg.report_interval / wsec)))
    n_reports = 0
    with open(ev_path, "a", newline="") as evf, open(log_path, "a", newline="") as logf, \
            open(mon_path, "a", newline="") as monf:
        ev_w = csv.writer(evf, lineterminator="\n")
        log_w = csv.writer(logf, lineterminator="\n")
        mon_w = csv.writer(monf, lineterminator="\n")
        for k in range(start, end):
            si = max(i for i, s in enumerate(stages) if s.first_window <= k)
            st = stages[si]
            window = next_window(plans[si], k - st.first_window)
            result, updated = learn_step(window, dictionary, stop, lcfg)
            t0 = k * wsec
            ev_w.writerows([k, e.atom_id, e.shift, _fmt(e.amplitude)] for e in result.events)
            counts = np.bincount([e.atom_id for e in result.events], minlength=cfg.n_atoms)
            dphi = [float(np.linalg.norm(a - b)) for a, b in zip(updated.atoms, dictionary.atoms)]
            log_w.writerow([k, st.label, _fmt(t0 + wsec), result.n_events, _fmt(result.srr_db)]
                           + [int(c) for c in counts] + [_fmt(d) for d in dphi])
            dictionary = updated
            monitor.log_events(t0, result.events)
            if (k + 1) % report_every == 0 or k + 1 == total:
                now = (k + 1) * wsec
                save_dictionary(dictionary, _snapshot_path(run_dir, k + 1))
                monitor.observe(take_snapshot(dictionary, now))
                mon_w.writerows(_monitor_rows(monitor.report()))
                n_reports += 1
    return RunSummary(run_dir, end, dictionary, n_reports)


# -- offline monitor / reports ------------------------------------------------------

def recompute_monitor(run_dir, overrides: Optional[dict] = None) -> list[MonitorReport]:
    """Replay monitoring from stored snapshots and events (e.g. with another ``delta``)."""
    run_dir = Path(run_dir)
    cfg = load_run_config(run_dir)
    if overrides:
        cfg = RunConfig.from_mapping({**asdict(cfg), **{k: v for k, v in overrides.items() if v is not None}})
    mcfg = cfg.monitor()
    wsec = cfg.window_seconds
    snaps = list_snapshots(run_dir)
    by_window: dict[int, list[Event]] = {}
    for w, e in read_events(run_dir):
        by_window.setdefault(w, []).append(e)
    monitor = Monitor(mcfg, cfg.n_atoms, cfg.sample_rate)
    reports = []
    done = 0
    for k, path in snaps:
        for w in range(done, k):
            monitor.log_events(w * wsec, by_window.get(w, []))
        done = k
        monitor.observe(take_snapshot(load_dictionary(path), k * wsec))
        if k > 0:
            reports.append(monitor.report())
    return reports


def write_monitor_csv(reports: Sequence[MonitorReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MONITOR_HEADER)
        for rep in reports:
            w.writerows(_monitor_rows(rep))


def read_stages(run_dir) -> list[Stage]:
    with open(Path(run_dir) / "stages.csv", newline="") as fh:
        rd = csv.DictReader(fh)
        return [Stage(r["label"], float(r["start"]), float(r["end"]), int(r["first_window"]),
                      int(r["n_windows"])) for r in rd]


def read_monitor_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return report times and an (n_reports, n_atoms) evolution-rate matrix."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = sorted({float(r["stream_time"]) for r in rows})
    n_atoms = 1 + max(int(r["atom_id"]) for r in rows)
    idx = {t: i for i, t in enumerate(times)}
    rates = np.zeros((len(times), n_atoms))
    for r in rows:
        rates[idx[float(r["stream_time"])], int(r["atom_id"])] = float(r["evolution_rate"])
    return np.array(times), rates


@dataclass
class StageFeatures:
    label: str
    center_freq_hz: np.ndarray
    event_rate: np.ndarray


def stage_features(run_dir) -> list[StageFeatures]:
    """Per-stage center frequencies (dictionary at stage end) and trailing event rates."""
    run_dir = Path(run_dir)
    cfg = load_run_config(run_dir)
    wsec = cfg.window_seconds
    snaps = dict(list_snapshots(run_dir))
    log = EventLog(cfg.n_atoms)
    by_window: dict[int, list[Event]] = {}
    for w, e in read_events(run_dir):
        by_window.setdefault(w, []).append(e)
    for w in sorted(by_window):
        log.append(w * wsec, by_window[w], cfg.sample_rate)
    out = []
    for st in read_stages(run_dir):
        last = st.first_window + st.n_windows
        k = max(i for i in snaps if i <= last)
        d = load_dictionary(snaps[k])
        window = min(cfg.event_rate_window, st.end - st.start)
        out.append(StageFeatures(st.label, dictionary_features(d, cfg.sample_rate),
                                 event_rate(log, window, st.end)))
    return out


def write_reports(run_dir) -> list[Path]:
    """Write evolution_rate.csv, scatter.csv and table1.csv into the run directory."""
    run_dir = Path(run_dir)
    times, rates = read_monitor_csv(run_dir / "monitor.csv")
    n_atoms = rates.shape[1]
    paths = []
    p = run_dir / "evolution_rate.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_min"] + [f"atom_{m + 1}" for m in range(n_atoms)])
        for t, row in zip(times, rates):
            w.writerow([_fmt(t / 60.0)] + [_fmt(v) for v in row])
    paths.append(p)

    feats = stage_features(run_dir)
    p = run_dir / "scatter.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom_id", "center_freq_hz", "event_rate", "stage"])
        for sf in feats:
            for m in range(n_atoms):
                w.writerow([m + 1, _fmt(sf.center_freq_hz[m]), _fmt(sf.event_rate[m]), sf.label])
    paths.append(p)

    p = run_dir / "table1.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom"] + [f"center_freq_khz_{sf.label}" for sf in feats]
                   + [f"event_rate_{sf.label}" for sf in feats])
        for m in range(n_atoms):
            w.writerow([m + 1] + [f"{sf.center_freq_hz[m] / 1000:.1f}" for sf in feats]
                       + [f"{sf.event_rate[m]:.0f}" for sf in feats])
    paths.append(p)
    return paths
