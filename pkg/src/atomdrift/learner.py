"""Hebbian gradient-ascent adaptation of the dictionary.

After a window is encoded, every atom that fired is nudged toward the residual
it left behind at its firing positions::

    atom_m += (eta / var(residual)) * sum_{i: m_i = m} a_i * residual[t_i : t_i + L_m]

and then renormalized. Atoms that did not fire are left untouched. The update
is gradient ascent on ``-|window - reconstruction|^2 / (2 var)`` with the event
placements and amplitudes held fixed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dictionary import Dictionary, normalize_atom
from .encoder import EncodeResult, Event, StopCondition, encode
from .errors import NumericError, SignalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnConfig:
    learning_rate: float = 2e-6
    variance_floor: float = 1e-12
    renormalize: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be positive")


@dataclass
class GradientAccumulator:
    sums: list[np.ndarray]
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(len(self.sums), dtype=np.int64)

    @classmethod
    def zeros(cls, dictionary: Dictionary) -> "GradientAccumulator":
        return cls([np.zeros_like(a) for a in dictionary.atoms])


def residual_variance(residual, floor: float = 1e-12) -> float:
    """Population variance of the residual, bounded below by ``floor``."""
    r = np.asarray(residual, dtype=np.float64)
    if r.size == 0:
        raise SignalError("empty residual")
    return max(float(np.var(r)), floor)


def accumulate(events: Sequence[Event], original, residual, dictionary: Dictionary) -> GradientAccumulator:
    """Sum amplitude-weighted residual slices per atom.

    ``original`` is accepted for interface symmetry with the encoder output;
    the gradient only depends on the final residual.
    """
    r = np.asarray(residual, dtype=np.float64)
    acc = GradientAccumulator.zeros(dictionary)
    for ev in events:
        L = dictionary[ev.atom_id].size
        if not 0 <= ev.shift <= r.size - L:
            raise SignalError(f"event shift {ev.shift} outside residual of {r.size} samples")
        acc.sums[ev.atom_id] += ev.amplitude * r[ev.shift:ev.shift + L]
        acc.counts[ev.atom_id] += 1
    return acc


def apply_update(dictionary: Dictionary, grad: GradientAccumulator, residual_var: float,
                 config: LearnConfig) -> Dictionary:
    """Return the updated dictionary; the input is not modified.

    Atoms with no events, and atoms whose gradient is non-finite (logged and
    skipped), keep their waveform bit-for-bit.
    """
    if residual_var < config.variance_floor:
        raise NumericError(f"residual variance {residual_var} below floor {config.variance_floor}")
    step = config.learning_rate / residual_var
    out = dictionary.copy()
    rejected = []
    for m, (g, n) in enumerate(zip(grad.sums, grad.counts)):
        if n == 0 or step == 0.0:
            continue
        if not np.all(np.isfinite(g)):
            rejected.append(m)
            continue
        w = dictionary[m] + step * g
        if not np.all(np.isfinite(w)) or not np.any(w):
            rejected.append(m)
            continue
        out.atoms[m] = normalize_atom(w) if config.renormalize else w
    if rejected:
        logger.warning("rejected non-finite update for atoms %s", rejected)
    out.updates = dictionary.updates + 1
    return out


def learn_step(window, dictionary: Dictionary, stop: StopCondition = StopCondition(),
               config: LearnConfig = LearnConfig()) -> tuple[EncodeResult, Dictionary]:
    """Encode ``window`` with the current dictionary, then apply one update."""
    result = encode(window, dictionary, stop)
    if not result.events:
        return result, dictionary.copy()
    grad = accumulate(result.events, window, result.residual, dictionary)
    var = residual_variance(result.residual, config.variance_floor)
    return result, apply_update(dictionary, grad, var, config)
