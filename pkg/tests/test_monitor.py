import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomdrift.dictionary import Dictionary, init_dictionary, normalize_atom, take_snapshot
from atomdrift.encoder import Event
from atomdrift.errors import DictionaryError, NumericError
from atomdrift.monitor import (DEFAULT_MAX_LAG, EventLog, Monitor, MonitorConfig, SnapshotBuffer, center_frequency,
                               event_rate, evolution_rate, frequency_bin, max_normalized_xcorr, report)

FS = 12000


def _smooth_atom(n=50, f=700.0):
    t = np.arange(n)
    return normalize_atom(np.hanning(n) * np.sin(2 * np.pi * f * t / FS))


def _lag_oracle(a, b, max_lag):
    best = 0.0
    for k in range(-max_lag, max_lag + 1):
        s = sum(a[i] * b[i - k] for i in range(len(a)) if 0 <= i - k < len(b))
        best = max(best, abs(s))
    return 1.0 - best / np.sqrt(np.dot(a, a) * np.dot(b, b))


def test_identical_atoms_zero_exactly():
    for seed in range(20):
        a = init_dictionary(1, 50, seed)[0]
        assert evolution_rate(a, a.copy()) == 0.0


def test_disjoint_supports_one_exactly():
    a = np.zeros(50)
    b = np.zeros(50)
    a[:10] = np.random.default_rng(0).standard_normal(10)
    b[30:40] = np.random.default_rng(1).standard_normal(10)
    assert evolution_rate(normalize_atom(a), normalize_atom(b)) == 1.0


def test_circular_shift_absorbed():
    a = _smooth_atom()
    b = np.roll(a, 3)
    rate = evolution_rate(b, a)
    assert rate == pytest.approx(_lag_oracle(b, a, DEFAULT_MAX_LAG), abs=1e-12)
    assert rate <= 0.05


def test_sign_flip_is_no_change():
    a = _smooth_atom()
    assert evolution_rate(-a, a) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 60))
def test_evolution_rate_range_and_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    a, b = normalize_atom(rng.standard_normal(n)), normalize_atom(rng.standard_normal(n))
    r = evolution_rate(a, b)
    assert 0.0 <= r <= 1.0
    assert r == pytest.approx(evolution_rate(b, a), abs=1e-14)
    assert r == pytest.approx(_lag_oracle(a, b, DEFAULT_MAX_LAG), abs=1e-12)


def test_evolution_rate_errors():
    with pytest.raises(DictionaryError):
        evolution_rate(np.ones(5), np.ones(6))
    with pytest.raises(DictionaryError):
        evolution_rate(np.zeros(5), np.ones(5))


def test_full_lag_xcorr_unequal_lengths():
    a = _smooth_atom(50)
    b = np.concatenate([np.zeros(7), a, np.zeros(7)])
    assert max_normalized_xcorr(b, a) == pytest.approx(1.0, abs=1e-12)


def _periodogram_oracle(w, nfft, fs):
    # explicit DFT sum, independent of the FFT path
    k = np.arange(nfft // 2 + 1)
    n = np.arange(w.size)
    spectrum = np.exp(-2j * np.pi * np.outer(k, n) / nfft) @ w
    p = np.abs(spectrum) ** 2
    p[1:(nfft + 1) // 2] *= 2
    f = k * fs / nfft
    return float(np.dot(f, p) / p.sum())


def test_centroid_1000hz_within_one_bin():
    t = np.arange(50)
    a = normalize_atom(np.hanning(50) * np.sin(2 * np.pi * 1000 * t / FS))
    cf = center_frequency(a, FS)
    assert abs(cf - 1000.0) <= frequency_bin(50, FS)
    assert cf == pytest.approx(_periodogram_oracle(a, 512, FS), rel=1e-10)


def test_centroid_dc_within_one_bin():
    cf = center_frequency(normalize_atom(np.ones(50)), FS)
    # zero padding spreads a constant atom into its sinc sidelobes; bound by the native bin width
    assert 0.0 <= cf <= FS / 50


def test_centroid_oracle_random_atoms():
    rng = np.random.default_rng(0)
    for n in (2, 17, 50, 64):
        a = rng.standard_normal(n)
        nfft = 1 << int(np.ceil(np.log2(8 * n)))
        assert center_frequency(a, FS) == pytest.approx(_periodogram_oracle(a, nfft, FS), rel=1e-10)


def test_centroid_invariances():
    a = np.random.default_rng(3).standard_normal(50)
    cf = center_frequency(a, FS)
    assert center_frequency(-a, FS) == pytest.approx(cf, rel=1e-12)
    assert center_frequency(a[::-1], FS) == pytest.approx(cf, rel=1e-12)
    assert 0.0 <= cf <= FS / 2


def test_centroid_errors():
    with pytest.raises(NumericError):
        center_frequency(np.zeros(10), FS)
    with pytest.raises(NumericError):
        center_frequency(np.array([1.0, np.nan]), FS)


def test_event_rate_examples():
    log = EventLog(8)
    assert not event_rate(log, 60.0, 60.0).any()
    log.append(0.0, [Event(5, s, 1.0) for s in range(6000, 121 * 6000, 6000)], 12000)
    rates = event_rate(log, 60.0, 60.0)
    assert rates[5] == 2.0
    assert rates.sum() == 2.0
    with pytest.raises(ValueError):
        event_rate(log, 0.0, 60.0)


def test_event_rate_sum_property():
    rng = np.random.default_rng(1)
    log = EventLog(4)
    times = []
    for w in range(10):
        evs = [Event(int(rng.integers(4)), int(rng.integers(60000)), 1.0) for _ in range(50)]
        log.append(5.0 * w, evs, 12000)
        times += [5.0 * w + e.shift / 12000 for e in evs]
    times = np.array(times)
    for now, win in ((50.0, 20.0), (33.3, 10.0), (55.0, 55.0)):
        total = np.count_nonzero((times > now - win) & (times <= now))
        assert event_rate(log, win, now).sum() * win == pytest.approx(total)


def test_buffer_exact_and_fallback():
    buf = SnapshotBuffer(retention=100.0)
    with pytest.raises(ValueError):
        buf.latest
    d = init_dictionary(2, 4, 0)
    for t in (0.0, 10.0, 20.0, 30.0):
        buf.add(take_snapshot(d, t))
    assert buf.at_or_before(20.0) == (buf.at_or_before(20.0)[0], True)
    snap, exact = buf.at_or_before(25.0)
    assert snap.stream_time == 20.0 and not exact
    snap, exact = buf.at_or_before(-5.0)
    assert snap.stream_time == 0.0 and not exact
    with pytest.raises(ValueError):
        buf.add(take_snapshot(d, 30.0))


def test_buffer_retention_keeps_lag_reachable():
    buf = SnapshotBuffer(retention=25.0)
    d = init_dictionary(2, 4, 0)
    for t in range(0, 101, 5):
        buf.add(take_snapshot(d, float(t)))
    assert buf.at_or_before(75.0) == (buf.at_or_before(75.0)[0], True)
    assert min(s.stream_time for s in buf) == 75.0


def _drifting(n_atoms, steps, moving):
    rng = np.random.default_rng(0)
    atoms = [normalize_atom(rng.standard_normal(20)) for _ in range(n_atoms)]
    out = []
    for k in range(steps):
        cur = [a.copy() for a in atoms]
        for m in moving:
            cur[m] = normalize_atom(rng.standard_normal(20))
        out.append(Dictionary(cur))
    return out


def test_stationary_dictionary_reports_zero():
    mon = Monitor(MonitorConfig(delta=10, report_interval=5, event_rate_window=20), 3, FS)
    d = init_dictionary(3, 20, 0)
    for k in range(10):
        mon.observe(take_snapshot(d, 5.0 * k))
        rep = mon.report()
        assert not rep.evolution_rate.any() and rep.alerts == []


def test_alert_requires_hold():
    cfg = MonitorConfig(delta=5, report_interval=5, event_rate_window=20, alert_threshold=0.1, alert_hold=2)
    mon = Monitor(cfg, 3, FS)
    dicts = _drifting(3, 4, moving=[1])
    alerts = []
    for k, d in enumerate(dicts):
        mon.observe(take_snapshot(d, 5.0 * k))
        alerts.append(mon.report().alerts)
    assert alerts[0] == [] and alerts[1] == []  # first over-threshold report does not alert yet
    assert alerts[2] == [1] and alerts[3] == [1]


def test_report_flags_approximate_lag():
    cfg = MonitorConfig(delta=7, report_interval=5, event_rate_window=20)
    buf = SnapshotBuffer(30)
    d = init_dictionary(2, 10, 0)
    buf.add(take_snapshot(d, 0.0))
    buf.add(take_snapshot(d, 5.0))
    buf.add(take_snapshot(d, 10.0))
    rep = report(buf, EventLog(2), cfg, FS)
    assert rep.approximate and rep.reference_time == 0.0
    buf.add(take_snapshot(d, 12.0))
    rep = report(buf, EventLog(2), cfg, FS)
    assert rep.reference_time == 5.0 and not rep.approximate


def test_report_empty_buffer():
    with pytest.raises(ValueError):
        report(SnapshotBuffer(10), EventLog(1), MonitorConfig(), FS)


def test_monitor_config_validation():
    with pytest.raises(ValueError):
        MonitorConfig(delta=0)
    with pytest.raises(ValueError):
        MonitorConfig(alert_hold=0)
