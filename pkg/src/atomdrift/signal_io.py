"""Sampled-signal containers, file formats and the random windowing protocol.

Two on-disk encodings are supported:

* ``csv-column``: one decimal value per line, an optional single header line.
* ``raw-f32le`` / ``raw-f64le``: packed little-endian IEEE-754 floats, no header.

Vendor container formats (e.g. MATLAB files from public bearing datasets) are
not parsed here; convert them to one of the above first, for instance with
``scipy.io.loadmat(path)[key].ravel().astype('<f8').tofile(out)``.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SignalError

DEFAULT_SAMPLE_RATE = 12000
DEFAULT_WINDOW_LEN = 60000

FORMATS = ("csv-column", "raw-f32le", "raw-f64le")
_RAW_DTYPES = {"raw-f32le": np.dtype("<f4"), "raw-f64le": np.dtype("<f8")}


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled real waveform."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        x = np.ascontiguousarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise SignalError(f"signal must be one-dimensional, got shape {x.shape}")
        if x.size == 0:
            raise SignalError("empty signal")
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise SignalError(f"non-finite sample at index {bad[0]}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise SignalError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise SignalError(f"unknown signal format {fmt!r}; expected one of {FORMATS}")


def _parse_csv(text: str) -> np.ndarray:
    lines = text.splitlines()
    # drop trailing blank lines only; a blank line inside the body is an error
    while lines and not lines[-1].strip():
        lines.pop()
    values = []
    for lineno, line in enumerate(lines):
        try:
            values.append(float(line))
        except ValueError:
            if lineno == 0:
                continue  # header
            raise SignalError(f"non-numeric record {line!r} on line {lineno + 1}") from None
    return np.array(values, dtype=np.float64)


def load_signal(path, format: str = "csv-column", sample_rate: int = DEFAULT_SAMPLE_RATE) -> Signal:
    """Read a signal file.

    Raises :class:`SignalError` for unreadable files, malformed records,
    empty files and non-finite samples (the message names the first bad index).
    """
    _check_format(format)
    try:
        if format == "csv-column":
            x = _parse_csv(Path(path).read_text())
        else:
            dtype = _RAW_DTYPES[format]
            raw = Path(path).read_bytes()
            if len(raw) % dtype.itemsize:
                raise SignalError(
                    f"{path}: size {len(raw)} is not a multiple of {dtype.itemsize} bytes")
            x = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    except OSError as exc:
        raise SignalError(f"cannot read {path}: {exc}") from exc
    return Signal(x, sample_rate)


def write_signal(signal: Signal, path, format: str = "raw-f64le") -> None:
    _check_format(format)
    try:
        if format == "csv-column":
            # repr gives the shortest string that parses back to the same double
            Path(path).write_text("".join(f"{v!r}\n" for v in signal.samples.tolist()))
        else:
            Path(path).write_bytes(signal.samples.astype(_RAW_DTYPES[format]).tobytes())
    except OSError as exc:
        raise SignalError(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class Segment:
    label: str
    signal: Signal


@dataclass(frozen=True)
class WindowPlan:
    """Recipe for drawing fixed-length windows from labelled segments.

    Window ``k`` depends only on ``(rng_seed, k)``: the generator is a Philox
    stream keyed by the seed with its counter set from the ordinal, so any
    window can be regenerated without replaying the ones before it.
    """

    window_len: int
    source_segments: Sequence[Segment]
    rng_seed: int
    total_windows: int
    sample_rate: int = field(init=False)

    def __post_init__(self):
        if self.window_len <= 0:
            raise SignalError("window_len must be positive")
        if not self.source_segments:
            raise SignalError("window plan needs at least one segment")
        rates = {s.signal.sample_rate for s in self.source_segments}
        if len(rates) != 1:
            raise SignalError(f"segments disagree on sample rate: {sorted(rates)}")
        for seg in self.source_segments:
            if len(seg.signal) < self.window_len:
                raise SignalError(
                    f"segment {seg.label!r} has {len(seg.signal)} samples, "
                    f"shorter than window_len={self.window_len}")
        object.__setattr__(self, "source_segments", tuple(self.source_segments))
        object.__setattr__(self, "sample_rate", rates.pop())


def window_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator addressing draw ``index`` of stream ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[int(index), 0, 0, 0]))


def draw_window(plan: WindowPlan, index: int) -> tuple[int, int]:
    """Return ``(segment_index, offset)`` of window ``index``."""
    if not 0 <= index < plan.total_windows:
        raise SignalError(f"window index {index} outside [0, {plan.total_windows})")
    rng = window_rng(plan.rng_seed, index)
    seg = int(rng.integers(len(plan.source_segments)))
    n = len(plan.source_segments[seg].signal)
    if n < plan.window_len:
        raise SignalError(f"window_len {plan.window_len} exceeds segment {seg}")
    offset = int(rng.integers(n - plan.window_len + 1))
    return seg, offset


def next_window(plan: WindowPlan, index: int) -> Signal:
    seg, offset = draw_window(plan, index)
    src = plan.source_segments[seg].signal
    return Signal(src.samples[offset:offset + plan.window_len].copy(), src.sample_rate)


# -- manifest ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: Path
    format: str
    sample_rate: int
    label: str

    def load(self) -> Segment:
        return Segment(self.label, load_signal(self.path, self.format, self.sample_rate))


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a segment manifest.

    The manifest is INI text with one ``[segment NAME]`` section per file::

        [segment bl_load0]
        path = bl_load0.f64
        format = raw-f64le
        sample_rate = 12000
        label = BL

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise SignalError(f"cannot read manifest {path}: {exc}") from exc
    entries = []
    for section in cp.sections():
        if not section.startswith("segment "):
            continue
        sec = cp[section]
        try:
            fmt = sec.get("format", "raw-f64le")
            _check_format(fmt)
            entries.append(ManifestEntry(
                name=section[len("segment "):].strip(),
                path=(path.parent / sec["path"]),
                format=fmt,
                sample_rate=sec.getint("sample_rate", DEFAULT_SAMPLE_RATE),
                label=sec["label"],
            ))
        except (KeyError, ValueError) as exc:
            raise SignalError(f"manifest section [{section}] is invalid: {exc}") from exc
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path) -> None:
    path = Path(path)
    cp = configparser.ConfigParser()
    for e in entries:
        rel = os.path.relpath(e.path, path.parent)
        cp[f"segment {e.name}"] = {
            "path": rel,
            "format": e.format,
            "sample_rate": str(e.sample_rate),
            "label": e.label,
        }
    with open(path, "w") as fh:
        cp.write(fh)


def add_manifest_entry(entry: ManifestEntry, path) -> None:
    """Insert or replace ``entry`` in the manifest at ``path``."""
    path = Path(path)
    entries = read_manifest(path) if path.exists() else []
    entries = [e for e in entries if e.name != entry.name] + [entry]
    write_manifest(entries, path)
