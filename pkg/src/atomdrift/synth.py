"""Deterministic synthetic vibration signals.

Two generators:

* :func:`gen_rig_signal` imitates an accelerometer on a motor test rig: weak shaft
  harmonics and structural tones below about 1 kHz plus white noise, optionally with an inner-race
  style fault, i.e. exponentially decaying resonance bursts repeating at the
  fault frequency.
* :func:`gen_from_dictionary` runs the sparse event model forward: noise plus
  a sum of scaled, shifted dictionary atoms.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dictionary import Dictionary
from .encoder import Event
from .errors import ConfigError, SignalError
from .signal_io import DEFAULT_SAMPLE_RATE, Signal

# ball-pass frequency of the inner race, in multiples of shaft speed, for a
# 6205-type deep-groove bearing
BPFI_ORDER = 5.4152
# shaft speed per load case (0-3 HP), rpm
LOAD_RPM = (1797.0, 1772.0, 1750.0, 1730.0)


@dataclass(frozen=True)
class FaultConfig:
    impulse_rate_hz: float
    resonance_hz: float
    decay_tau_s: float
    severity: float


@dataclass(frozen=True)
class RigConfig:
    sample_rate: int = DEFAULT_SAMPLE_RATE
    shaft_hz: float = LOAD_RPM[0] / 60.0
    tone_components: Sequence[tuple[float, float]] = field(default_factory=tuple)
    noise_sigma: float = 0.0
    fault: Optional[FaultConfig] = None
    seed: int = 0

    def validate(self) -> None:
        nyq = self.sample_rate / 2
        if self.sample_rate <= 0 or self.shaft_hz <= 0:
            raise ConfigError("sample_rate and shaft_hz must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        for f, a in self.tone_components:
            if not 0 <= f < nyq:
                raise ConfigError(f"tone at {f} Hz is not below Nyquist ({nyq} Hz)")
            if a < 0:
                raise ConfigError("tone amplitudes must be non-negative")
        if self.fault is not None:
            ft = self.fault
            if not 0 < ft.resonance_hz < nyq:
                raise ConfigError(f"fault resonance {ft.resonance_hz} Hz is not below Nyquist")
            if ft.decay_tau_s <= 0 or ft.impulse_rate_hz <= 0 or ft.severity < 0:
                raise ConfigError("fault needs positive decay, impulse rate and non-negative severity")


def _bursts(n: int, fs: float, fault: FaultConfig, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(n)
    period = 1.0 / fault.impulse_rate_hz
    span = int(np.ceil(8 * fault.decay_tau_s * fs))
    tk = np.arange(span) / fs
    # ring-down shape for unit severity, scaled afterwards so severity acts linearly
    start = rng.uniform(0, period)
    n_imp = int(np.ceil(n / fs / period)) + 1
    jitter = rng.uniform(-0.005, 0.005, n_imp) * period
    for k in range(n_imp):
        t0 = start + k * period + jitter[k]
        i0 = int(np.ceil(t0 * fs))
        if i0 >= n:
            break
        if i0 < 0:
            continue
        frac = i0 / fs - t0
        shape = np.exp(-(tk + frac) / fault.decay_tau_s) * np.sin(2 * np.pi * fault.resonance_hz * (tk + frac))
        m = min(span, n - i0)
        out[i0:i0 + m] += shape[:m]
    return fault.severity * out


def gen_rig_signal(config: RigConfig, duration_s: float) -> Signal:
    config.validate()
    if not duration_s > 0:
        raise ConfigError("duration must be positive")
    fs = config.sample_rate
    n = int(round(duration_s * fs))
    if n < 1:
        raise ConfigError("duration shorter than one sample")
    phase_ss, noise_ss, fault_ss = np.random.SeedSequence(config.seed).spawn(3)
    t = np.arange(n) / fs
    x = np.zeros(n)
    phases = np.random.default_rng(phase_ss).uniform(0, 2 * np.pi, len(config.tone_components))
    for (f, a), ph in zip(config.tone_components, phases):
        x += a * np.sin(2 * np.pi * f * t + ph)
    if config.fault is not None:
        x += _bursts(n, fs, config.fault, np.random.default_rng(fault_ss))
    if config.noise_sigma > 0:
        x += np.random.default_rng(noise_ss).normal(0.0, config.noise_sigma, n)
    return Signal(x, fs)


def gen_from_dictionary(dictionary: Dictionary, events: Sequence[Event], noise_sigma: float,
                        length: int, seed: int = 0, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Signal:
    """Noise plus the superposition of the given events."""
    x = np.zeros(length)
    for ev in events:
        if not 0 <= ev.atom_id < len(dictionary):
            raise SignalError(f"event references atom {ev.atom_id} of {len(dictionary)}")
        atom = dictionary[ev.atom_id]
        if not 0 <= ev.shift <= length - atom.size:
            raise SignalError(f"event at shift {ev.shift} does not fit in {length} samples")
        x[ev.shift:ev.shift + atom.size] += ev.amplitude * atom
    if noise_sigma > 0:
        x += np.random.default_rng(seed).normal(0.0, noise_sigma, length)
    return Signal(x, sample_rate)


def baseline_tones(shaft_hz: float) -> list[tuple[float, float]]:
    """Healthy-machine background: weak shaft harmonics, stronger structural tones below ~1 kHz."""
    return [
        (shaft_hz, 0.1),
        (2 * shaft_hz, 0.05),
        (10 * shaft_hz, 0.6),
        (20 * shaft_hz, 1.0),
        (33 * shaft_hz, 0.5),
    ]


# fault stages of increasing size; the larger defect rings at a lower, longer resonance
FAULT_PRESETS = {
    "ir7": dict(resonance_hz=3500.0, decay_tau_s=0.0006, severity=5.0),
    "ir14": dict(resonance_hz=2400.0, decay_tau_s=0.0010, severity=6.0),
}
PRESETS = ("baseline",) + tuple(FAULT_PRESETS)
PRESET_LABELS = {"baseline": "BL", "ir7": "IR7", "ir14": "IR14"}
DEFAULT_NOISE_SIGMA = 0.05


def preset_config(name: str, load: int = 0, seed: int = 0,
                  noise_sigma: float = DEFAULT_NOISE_SIGMA,
                  sample_rate: int = DEFAULT_SAMPLE_RATE) -> RigConfig:
    """Rig configuration for a named stage (``baseline``, ``ir7``, ``ir14``) at a load case 0-3."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    if not 0 <= load < len(LOAD_RPM):
        raise ConfigError(f"load case must be in 0..{len(LOAD_RPM) - 1}")
    shaft = LOAD_RPM[load] / 60.0
    cfg = RigConfig(sample_rate=sample_rate, shaft_hz=shaft, tone_components=tuple(baseline_tones(shaft)),
                    noise_sigma=noise_sigma, seed=seed)
    if name in FAULT_PRESETS:
        cfg = replace(cfg, fault=FaultConfig(impulse_rate_hz=BPFI_ORDER * shaft, **FAULT_PRESETS[name]))
    return cfg
