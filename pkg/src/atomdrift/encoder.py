"""Shift-invariant matching pursuit.

A window is decomposed greedily into events ``(atom_id, shift, amplitude)``
such that::

    window = sum_i amplitude_i * atom[atom_id_i] placed at shift_i  +  residual

Each iteration picks the (atom, shift) pair with the largest absolute
correlation against the current residual and subtracts that scaled atom.

:func:`encode` does not recompute every correlation per iteration. Subtracting
atom ``m`` at shift ``t`` only changes correlations at shifts within one atom
length of ``t``, and the change is ``-a`` times the cross-correlation between
atoms, which is precomputed once per call. Per-column and per-block maxima
are kept so the argmax costs O(number of blocks) rather than O(M * N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import signal as sps

from .dictionary import Dictionary
from .errors import DictionaryError, SignalError
from .signal_io import Signal

# direct correlation when len(residual) * len(atom) is below this
FFT_CROSSOVER = 200_000
# correlations within this (scaled) distance of the maximum count as ties
TIE_TOL = 1e-12
_BLOCK = 512


class Event(NamedTuple):
    atom_id: int
    shift: int
    amplitude: float


@dataclass(frozen=True)
class StopCondition:
    """Pursuit stops at whichever bound is reached first.

    ``max_events_per_sample=0.1`` is a tenfold reduction of the data rate,
    counting one token per event.
    """

    max_events_per_sample: Optional[float] = 0.1
    min_srr_db: Optional[float] = 12.0

    def __post_init__(self):
        if self.max_events_per_sample is None and self.min_srr_db is None:
            raise ValueError("stop condition needs max_events_per_sample or min_srr_db")
        if self.max_events_per_sample is not None and self.max_events_per_sample <= 0:
            raise ValueError("max_events_per_sample must be positive")


@dataclass
class EncodeResult:
    events: list[Event]
    residual: np.ndarray
    srr_db: float
    events_per_sample: float

    @property
    def n_events(self) -> int:
        return len(self.events)


def _samples(x) -> np.ndarray:
    if isinstance(x, Signal):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def correlate_direct(residual, atom) -> np.ndarray:
    return np.correlate(_samples(residual), np.asarray(atom, dtype=np.float64), mode="valid")


def correlate_fft(residual, atom) -> np.ndarray:
    atom = np.asarray(atom, dtype=np.float64)
    return sps.oaconvolve(_samples(residual), atom[::-1], mode="valid")


def correlate(residual, atom, method: str = "auto") -> np.ndarray:
    """Valid-mode cross-correlation: ``out[t] = sum_k residual[t + k] * atom[k]``.

    ``method`` is ``"direct"``, ``"fft"`` (overlap-add) or ``"auto"``, which
    picks by problem size.
    """
    r = _samples(residual)
    atom = np.asarray(atom, dtype=np.float64)
    if atom.size > r.size:
        raise SignalError(f"atom length {atom.size} exceeds residual length {r.size}")
    if method == "auto":
        method = "direct" if r.size * atom.size < FFT_CROSSOVER else "fft"
    if method == "direct":
        return correlate_direct(r, atom)
    if method == "fft":
        return correlate_fft(r, atom)
    raise ValueError(f"unknown correlation method {method!r}")


def _pick(absvals_by_atom, shift_base: np.ndarray, vmax: float):
    """Lowest (atom, shift) among entries tied with ``vmax``.

    ``absvals_by_atom`` is an (M, k) array of |correlation| at shifts ``shift_base``.
    """
    tol = TIE_TOL * max(1.0, vmax)
    hit = absvals_by_atom >= vmax - tol
    m = int(np.flatnonzero(hit.any(axis=1))[0])
    return m, int(shift_base[np.flatnonzero(hit[m])[0]])


def best_event(residual, dictionary: Dictionary, method: str = "auto") -> Event:
    """Event maximizing |correlation| over all atoms and valid shifts.

    Ties resolve to the lowest atom id, then the lowest shift. An all-zero
    residual yields amplitude 0, which callers treat as a stop signal.
    """
    if len(dictionary) == 0:
        raise DictionaryError("empty dictionary")
    r = _samples(residual)
    corrs = [correlate(r, a, method) for a in dictionary.atoms]
    vmax = max(float(np.abs(c).max()) for c in corrs)
    tol = TIE_TOL * max(1.0, vmax)
    for m, c in enumerate(corrs):
        hits = np.flatnonzero(np.abs(c) >= vmax - tol)
        if hits.size:
            t = int(hits[0])
            return Event(m, t, float(c[t]))
    raise AssertionError("unreachable")


def subtract_event(residual, event: Event, dictionary: Dictionary) -> np.ndarray:
    """Return a copy of ``residual`` with the event's scaled atom removed."""
    r = np.array(_samples(residual), dtype=np.float64)
    atom = dictionary[event.atom_id]
    if not 0 <= event.shift <= r.size - atom.size:
        raise SignalError(f"shift {event.shift} puts atom {event.atom_id} outside the residual")
    r[event.shift:event.shift + atom.size] -= event.amplitude * atom
    return r


def _energy(x: np.ndarray) -> float:
    return float(np.dot(x, x))


def srr_db(original, residual) -> float:
    """Signal-to-residual ratio in dB; ``inf`` when the residual is exactly zero."""
    x, r = _samples(original), _samples(residual)
    if x.shape != r.shape:
        raise SignalError("original and residual lengths differ")
    ex = _energy(x)
    if ex == 0.0:
        raise SignalError("zero-energy original has no defined SRR")
    er = _energy(r)
    if er == 0.0:
        return math.inf
    return 10.0 * math.log10(ex / er)


def atom_cross_gram(dictionary: Dictionary) -> np.ndarray:
    """``G[k, m, d + L - 1] = sum_j atom_k[j] * atom_m[j + d]`` with zero padding to L = max length."""
    L = dictionary.max_len
    M = len(dictionary)
    padded = np.zeros((M, L))
    for m, a in enumerate(dictionary.atoms):
        padded[m, :a.size] = a
    G = np.empty((M, M, 2 * L - 1))
    for k in range(M):
        for m in range(M):
            G[k, m] = np.correlate(padded[m], padded[k], mode="full")
    return G


def encode(window, dictionary: Dictionary, stop: StopCondition = StopCondition(),
           method: str = "auto") -> EncodeResult:
    """Run matching pursuit on ``window`` until ``stop`` or a zero best amplitude."""
    x = _samples(window)
    N = x.size
    M = len(dictionary)
    lens = np.array(dictionary.lengths)
    Lmax, Lmin = int(lens.max()), int(lens.min())
    if N < Lmax:
        raise SignalError(f"window of {N} samples is shorter than the longest atom ({Lmax})")

    P = N - Lmin + 1
    C = np.zeros((M, P))
    for m, a in enumerate(dictionary.atoms):
        C[m, :N - a.size + 1] = correlate(x, a, method)
    valid = None
    if Lmax != Lmin:
        valid = np.arange(P)[None, :] <= (N - lens)[:, None]
    G = atom_cross_gram(dictionary)

    nb = -(-P // _BLOCK)
    colmax = np.abs(C).max(axis=0)
    padded_cols = np.zeros(nb * _BLOCK)
    padded_cols[:P] = colmax
    bmax = padded_cols.reshape(nb, _BLOCK).max(axis=1)

    r = x.copy()
    e0 = _energy(x)
    energy = e0
    max_events = math.inf
    if stop.max_events_per_sample is not None:
        max_events = stop.max_events_per_sample * N
    target = stop.min_srr_db
    events: list[Event] = []

    while len(events) < max_events:
        if target is not None and e0 > 0.0:
            srr = math.inf if energy <= 0.0 else 10.0 * math.log10(e0 / energy)
            if srr >= target - 1e-6:
                energy = _energy(r)
                if energy == 0.0 or 10.0 * math.log10(e0 / energy) >= target:
                    break
        b = int(bmax.argmax())
        vmax = float(bmax[b])
        if vmax == 0.0:
            break
        thr = vmax - TIE_TOL * max(1.0, vmax)
        lo = b * _BLOCK
        seg = colmax[lo:lo + _BLOCK]
        t = lo + int(seg.argmax())
        col = np.abs(C[:, t])
        if (np.count_nonzero(bmax >= thr) == 1 and np.count_nonzero(seg >= thr) == 1
                and np.count_nonzero(col >= thr) == 1):
            m = int(col.argmax())
        else:
            blocks = np.flatnonzero(bmax >= thr)
            cols = np.concatenate([
                bl * _BLOCK + np.flatnonzero(colmax[bl * _BLOCK:(bl + 1) * _BLOCK] >= thr)
                for bl in blocks])
            m, t = _pick(np.abs(C[:, cols]), cols, vmax)

        atom = dictionary.atoms[m]
        L = atom.size
        seg = r[t:t + L]
        a = float(np.dot(seg, atom))
        if a == 0.0:
            break
        seg -= a * atom
        energy -= a * a
        events.append(Event(m, t, a))

        lo = max(0, t - Lmax + 1)
        hi = min(P, t + Lmax)
        g0 = lo - t + Lmax - 1
        C[:, lo:hi] -= a * G[:, m, g0:g0 + hi - lo]
        if valid is not None:
            C[:, lo:hi] *= valid[:, lo:hi]
        colmax[lo:hi] = np.abs(C[:, lo:hi]).max(axis=0)
        for bl in range(lo // _BLOCK, (hi - 1) // _BLOCK + 1):
            bmax[bl] = colmax[bl * _BLOCK:(bl + 1) * _BLOCK].max()

    srr = math.inf if e0 == 0.0 else srr_db(x, r)
    return EncodeResult(events, r, srr, len(events) / N)


def reconstruct(events, dictionary: Dictionary, length: int) -> np.ndarray:
    """Sum of the scaled, shifted atoms named by ``events``."""
    out = np.zeros(length)
    for ev in events:
        atom = dictionary[ev.atom_id]
        out[ev.shift:ev.shift + atom.size] += ev.amplitude * atom
    return out
