import csv
import filecmp
from dataclasses import replace

import numpy as np
import pytest

from atomdrift.dictionary import init_dictionary, load_dictionary
from atomdrift.errors import ConfigError
from atomdrift.pipeline import (RunConfig, list_snapshots, load_run_config, read_monitor_csv, recompute_monitor,
                                run_learning, stage_features, write_monitor_csv, write_reports)

RUN_FILES = ("events.csv", "learning_log.csv", "monitor.csv", "stages.csv", "run.ini")


def small_config(**kw) -> RunConfig:
    base = RunConfig(window_len=1200, synth_segment_seconds=2.0, schedule=[("BL", 3.0), ("IR7", 3.0)],
                     n_atoms=8, atom_len=30, eta=2e-5, delta=1.0, report_interval=0.5, event_rate_window=2.0,
                     seed_signal=3, seed_dict=4)
    return replace(base, **kw)


def _same_dir(a, b):
    for name in RUN_FILES:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    sa, sb = list_snapshots(a), list_snapshots(b)
    assert [k for k, _ in sa] == [k for k, _ in sb]
    for (_, pa), (_, pb) in zip(sa, sb):
        assert filecmp.cmp(pa, pb, shallow=False)


def test_null_learning_keeps_dictionary(tmp_path):
    cfg = RunConfig(schedule=[("BL", 60.0)], eta=0.0, delta=10.0, report_interval=5.0, event_rate_window=30.0,
                    synth_segment_seconds=10.0)
    summary = run_learning(cfg, tmp_path)
    assert summary.windows_processed == 12
    init = init_dictionary(cfg.n_atoms, cfg.atom_len, cfg.seed_dict)
    assert summary.final_dictionary.equals(init)
    assert load_dictionary(list_snapshots(tmp_path)[-1][1]).equals(init)
    _, rates = read_monitor_csv(tmp_path / "monitor.csv")
    assert not rates.any()


def test_run_outputs(tmp_path):
    cfg = small_config()
    summary = run_learning(cfg, tmp_path)
    assert summary.windows_processed == 60
    assert summary.reports == 12
    with open(tmp_path / "learning_log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 60
    assert {r["stage"] for r in rows} == {"BL", "IR7"}
    for r in rows:
        assert float(r["srr_db"]) >= 12.0 or int(r["n_events"]) == 120
        assert sum(int(r[f"count_{m}"]) for m in range(8)) == int(r["n_events"])
    with open(tmp_path / "events.csv") as fh:
        ev = list(csv.DictReader(fh))
    assert len(ev) == sum(int(r["n_events"]) for r in rows)
    assert all(len(e["amplitude"].lstrip("-").replace(".", "").split("e")[0]) <= 17 for e in ev)
    times, rates = read_monitor_csv(tmp_path / "monitor.csv")
    assert np.allclose(times, 0.5 * np.arange(1, 13))
    assert ((rates >= 0) & (rates <= 1)).all()
    for d in (load_dictionary(p) for _, p in list_snapshots(tmp_path)):
        d.check_normalized()


def test_run_is_deterministic(tmp_path):
    run_learning(small_config(), tmp_path / "a")
    run_learning(small_config(), tmp_path / "b")
    _same_dir(tmp_path / "a", tmp_path / "b")
    run_learning(small_config(seed_signal=5), tmp_path / "c")
    assert (tmp_path / "a" / "events.csv").read_bytes() != (tmp_path / "c" / "events.csv").read_bytes()


@pytest.mark.parametrize("stop_at", [7, 30, 31])
def test_resume_matches_uninterrupted(tmp_path, stop_at):
    full, part = tmp_path / "full", tmp_path / "part"
    run_learning(small_config(), full)
    run_learning(small_config(), part, max_windows=stop_at)
    summary = run_learning(load_run_config(part), part, resume=True)
    assert summary.windows_processed == 60
    _same_dir(full, part)


def test_monitor_replay_matches_online(tmp_path):
    run_learning(small_config(), tmp_path)
    write_monitor_csv(recompute_monitor(tmp_path), tmp_path / "replay.csv")
    assert (tmp_path / "replay.csv").read_bytes() == (tmp_path / "monitor.csv").read_bytes()
    other = recompute_monitor(tmp_path, {"delta": 0.5})
    assert len(other) == 12


def test_reports(tmp_path):
    run_learning(small_config(), tmp_path)
    paths = write_reports(tmp_path)
    assert [p.name for p in paths] == ["evolution_rate.csv", "scatter.csv", "table1.csv"]
    with open(tmp_path / "evolution_rate.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time_min"] + [f"atom_{m}" for m in range(1, 9)]
    assert len(rows) == 13
    with open(tmp_path / "scatter.csv") as fh:
        sc = list(csv.DictReader(fh))
    assert len(sc) == 16 and {r["stage"] for r in sc} == {"BL", "IR7"}
    with open(tmp_path / "table1.csv") as fh:
        tb = list(csv.reader(fh))
    assert tb[0] == ["atom", "center_freq_khz_BL", "center_freq_khz_IR7", "event_rate_BL", "event_rate_IR7"]
    assert len(tb) == 9
    feats = stage_features(tmp_path)
    assert [f.label for f in feats] == ["BL", "IR7"]


def test_config_ini_roundtrip_and_overrides():
    cfg = small_config(min_srr_db=None, manifest="m.ini")
    again = RunConfig.from_ini(cfg.to_ini())
    assert again == cfg
    over = RunConfig.from_ini(cfg.to_ini(), {"eta": "0.5", "schedule": "BL:10, IR14:20"})
    assert over.eta == 0.5 and over.schedule == [("BL", 10.0), ("IR14", 20.0)]


@pytest.mark.parametrize("text", [
    "[run]\nbogus = 1\n",
    "[run]\nschedule = BL:-5\n",
    "[run]\neta = fast\n",
    "[run]\nmin_srr_db = none\nmax_events_per_sample = none\n",
    "not an ini",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        RunConfig.from_ini(text)


def test_unknown_stage_label(tmp_path):
    with pytest.raises(ConfigError):
        run_learning(small_config(schedule=[("OR21", 1.0)]), tmp_path)
