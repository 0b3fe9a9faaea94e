"""Drift and feature metrics for an evolving dictionary.

Three per-atom quantities are tracked over stream time:

* evolution rate: ``1 - max |normalized cross-correlation|`` between the atom
  now and the same atom ``delta`` seconds earlier, scanning small relative lags;
* center frequency: spectral centroid of the atom's zero-padded periodogram;
* event rate: activations per second over a trailing window.
"""
from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .dictionary import Dictionary, Snapshot
from .encoder import Event
from .errors import DictionaryError, NumericError

# relative lags scanned by evolution_rate; disjoint supports further apart than this score 1
DEFAULT_MAX_LAG = 5
PAD_FACTOR = 8
_TIME_EPS = 1e-9


def max_normalized_xcorr(a, b, max_lag: Optional[int] = None) -> float:
    """Largest |normalized cross-correlation| of two waveforms.

    ``max_lag=None`` scans every overlap; otherwise lags in ``[-max_lag, max_lag]``
    around alignment of the first samples.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DictionaryError("atoms must be one-dimensional")
    xc = np.correlate(a, b, mode="full")
    # zero-lag autocorrelations from the same kernel keep identical inputs exact
    ea = np.correlate(a, a, mode="full")[a.size - 1]
    eb = np.correlate(b, b, mode="full")[b.size - 1]
    if ea == 0.0 or eb == 0.0:
        raise DictionaryError("zero-norm atom")
    if max_lag is not None:
        zero = b.size - 1
        k = int(max_lag)
        xc = xc[max(0, zero - k):zero + k + 1]
    return float(np.abs(xc).max() / math.sqrt(ea * eb))


def evolution_rate(atom_now, atom_past, max_lag: Optional[int] = DEFAULT_MAX_LAG) -> float:
    """``1 - max |crosscorr|``; 0 means unchanged, 1 means uncorrelated."""
    if np.shape(atom_now) != np.shape(atom_past):
        raise DictionaryError(f"atom shapes differ: {np.shape(atom_now)} vs {np.shape(atom_past)}")
    return min(1.0, max(0.0, 1.0 - max_normalized_xcorr(atom_now, atom_past, max_lag)))


def center_frequency(atom, sample_rate: float, pad_factor: int = PAD_FACTOR) -> float:
    """Power-weighted mean frequency (Hz) of the atom's one-sided periodogram.

    The waveform is zero-padded to the next power of two at least
    ``pad_factor`` times its length; no taper is applied.
    """
    w = np.asarray(atom, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise NumericError("non-finite atom")
    nfft = 1 << max(0, math.ceil(math.log2(pad_factor * w.size)))
    power = np.abs(np.fft.rfft(w, nfft)) ** 2
    # one-sided: interior bins carry both signs of frequency
    power[1:(nfft + 1) // 2] *= 2.0
    total = power.sum()
    if total == 0.0:
        raise NumericError("zero-energy atom has no center frequency")
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    return float(np.dot(freqs, power) / total)


def frequency_bin(length: int, sample_rate: float, pad_factor: int = PAD_FACTOR) -> float:
    return sample_rate / (1 << max(0, math.ceil(math.log2(pad_factor * length))))


class EventLog:
    """Append-only record of event times (stream seconds) and atom ids."""

    def __init__(self, n_atoms: int):
        self.n_atoms = n_atoms
        self._times: list[np.ndarray] = []
        self._atoms: list[np.ndarray] = []
        self._t = np.empty(0)
        self._m = np.empty(0, dtype=np.int64)
        self._dirty = False

    def append(self, window_start: float, events: Sequence[Event], sample_rate: float) -> None:
        if not events:
            return
        shifts = np.fromiter((e.shift for e in events), dtype=np.float64, count=len(events))
        ids = np.fromiter((e.atom_id for e in events), dtype=np.int64, count=len(events))
        self._times.append(window_start + shifts / sample_rate)
        self._atoms.append(ids)
        self._dirty = True

    def _arrays(self):
        if self._dirty:
            self._t = np.concatenate([self._t, *self._times])
            self._m = np.concatenate([self._m, *self._atoms])
            self._times.clear()
            self._atoms.clear()
            self._dirty = False
        return self._t, self._m

    def counts(self, t0: float, t1: float) -> np.ndarray:
        """Per-atom event counts with time in ``(t0, t1]``."""
        t, m = self._arrays()
        sel = (t > t0) & (t <= t1)
        return np.bincount(m[sel], minlength=self.n_atoms)

    def prune(self, before: float) -> None:
        t, m = self._arrays()
        keep = t > before
        self._t, self._m = t[keep], m[keep]

    def __len__(self) -> int:
        t, _ = self._arrays()
        return t.size


def event_rate(events: EventLog, window_seconds: float, now: float) -> np.ndarray:
    """Per-atom events per second over the trailing window ``(now - window_seconds, now]``."""
    if not window_seconds > 0:
        raise ValueError("window_seconds must be positive")
    return events.counts(now - window_seconds, now) / window_seconds


@dataclass(frozen=True)
class MonitorConfig:
    delta: float = 600.0
    report_interval: float = 60.0
    event_rate_window: float = 1800.0
    alert_threshold: float = 0.1
    alert_hold: int = 2
    max_lag: Optional[int] = DEFAULT_MAX_LAG

    def __post_init__(self):
        if not (self.delta > 0 and self.report_interval > 0 and self.event_rate_window > 0):
            raise ValueError("delta and intervals must be positive")
        if self.alert_hold < 1:
            raise ValueError("alert_hold must be at least 1")


class SnapshotBuffer:
    """Time-ordered ring of snapshots retaining at least ``retention`` seconds."""

    def __init__(self, retention: float):
        self.retention = retention
        self._snaps: deque[Snapshot] = deque()

    def add(self, snap: Snapshot) -> None:
        if self._snaps and snap.stream_time <= self._snaps[-1].stream_time:
            raise ValueError("snapshots must arrive in increasing stream_time")
        self._snaps.append(snap)
        horizon = snap.stream_time - self.retention
        # keep one snapshot at or before the horizon so lag lookups still resolve
        while len(self._snaps) > 1 and self._snaps[1].stream_time <= horizon:
            self._snaps.popleft()

    def __len__(self) -> int:
        return len(self._snaps)

    def __iter__(self):
        return iter(self._snaps)

    @property
    def latest(self) -> Snapshot:
        if not self._snaps:
            raise ValueError("empty snapshot buffer")
        return self._snaps[-1]

    def at_or_before(self, t: float) -> tuple[Snapshot, bool]:
        """Snapshot at ``t`` (exact=True) or the nearest earlier one.

        Falls back to the earliest snapshot when nothing precedes ``t``; that
        result is also flagged inexact.
        """
        if not self._snaps:
            raise ValueError("empty snapshot buffer")
        times = [s.stream_time for s in self._snaps]
        i = bisect.bisect_right(times, t + _TIME_EPS) - 1
        if i < 0:
            return self._snaps[0], False
        snap = self._snaps[i]
        return snap, abs(snap.stream_time - t) <= _TIME_EPS


@dataclass
class MonitorReport:
    stream_time: float
    reference_time: float
    approximate: bool
    evolution_rate: np.ndarray
    center_frequency_hz: np.ndarray
    event_rate_per_s: np.ndarray
    alerts: list[int] = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return self.evolution_rate.size


def dictionary_features(dictionary: Dictionary, sample_rate: float) -> np.ndarray:
    return np.array([center_frequency(a, sample_rate) for a in dictionary.atoms])


def report(buffer: SnapshotBuffer, event_log: EventLog, config: MonitorConfig,
           sample_rate: float, streaks: Optional[np.ndarray] = None) -> MonitorReport:
    """Assemble metrics at the buffer's newest stream time.

    ``streaks`` holds per-atom counts of consecutive over-threshold reports
    and is updated in place; pass the same array on every call.
    """
    now = buffer.latest
    past, exact = buffer.at_or_before(now.stream_time - config.delta)
    d_now, d_past = now.dictionary, past.dictionary
    rates = np.array([evolution_rate(a, b, config.max_lag)
                      for a, b in zip(d_now.atoms, d_past.atoms)])
    cf = dictionary_features(d_now, sample_rate)
    window = min(config.event_rate_window, now.stream_time) if now.stream_time > 0 else config.event_rate_window
    er = event_rate(event_log, window, now.stream_time)
    if streaks is None:
        streaks = np.zeros(len(d_now), dtype=np.int64)
    over = rates > config.alert_threshold
    streaks[over] += 1
    streaks[~over] = 0
    alerts = [int(m) for m in np.flatnonzero(streaks >= config.alert_hold)]
    return MonitorReport(now.stream_time, past.stream_time, not exact, rates, cf, er, alerts)


class Monitor:
    """Online bookkeeping: snapshot ring, event log and alert streaks."""

    def __init__(self, config: MonitorConfig, n_atoms: int, sample_rate: float):
        self.config = config
        self.sample_rate = sample_rate
        retention = 2 * config.delta + config.report_interval
        self.buffer = SnapshotBuffer(retention)
        self.events = EventLog(n_atoms)
        self.streaks = np.zeros(n_atoms, dtype=np.int64)

    def observe(self, snap: Snapshot) -> None:
        self.buffer.add(snap)

    def log_events(self, window_start: float, events: Iterable[Event]) -> None:
        self.events.append(window_start, list(events), self.sample_rate)

    def report(self) -> MonitorReport:
        rep = report(self.buffer, self.events, self.config, self.sample_rate, self.streaks)
        self.events.prune(rep.stream_time - self.config.event_rate_window - self.config.report_interval)
        return rep
