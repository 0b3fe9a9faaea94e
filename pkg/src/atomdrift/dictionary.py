"""Atom dictionaries: initialization, normalization, snapshots and persistence.

An atom is a 1-D float64 array of unit L2 norm; its id is its position in
:attr:`Dictionary.atoms`.

Binary file layout (all little-endian)::

    b"DICT"  u32 version  u32 M  { u32 length, f64 * length } * M
"""
from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DictionaryError

MAGIC = b"DICT"
FORMAT_VERSION = 1
NORM_TOL = 1e-9


def normalize_atom(waveform) -> np.ndarray:
    """Scale ``waveform`` to unit L2 norm.

    >>> normalize_atom([3.0, 4.0])
    array([0.6, 0.8])
    """
    w = np.asarray(waveform, dtype=np.float64)
    if w.ndim != 1:
        raise DictionaryError("atom must be one-dimensional")
    if not np.all(np.isfinite(w)):
        raise DictionaryError("atom has non-finite values")
    norm = np.linalg.norm(w)
    if norm == 0.0:
        raise DictionaryError("cannot normalize a zero-norm atom")
    if norm == 1.0:
        return w.copy()
    return w / norm


def _check_atom(w: np.ndarray, idx: int) -> None:
    if w.ndim != 1 or w.size < 2:
        raise DictionaryError(f"atom {idx} must be 1-D with length >= 2")
    if not np.all(np.isfinite(w)):
        raise DictionaryError(f"atom {idx} has non-finite values")


@dataclass
class Dictionary:
    """Ordered list of unit-norm atoms, the learned feature set.

    ``updates`` counts learning updates applied; ``created`` is wall-clock
    metadata and is not persisted.
    """

    atoms: list[np.ndarray]
    updates: int = 0
    created: float = field(default_factory=time.time, compare=False)

    def __post_init__(self):
        if len(self.atoms) < 1:
            raise DictionaryError("dictionary needs at least one atom")
        atoms = []
        for i, a in enumerate(self.atoms):
            w = np.array(a, dtype=np.float64)
            _check_atom(w, i)
            atoms.append(w)
        self.atoms = atoms

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, m: int) -> np.ndarray:
        return self.atoms[m]

    @property
    def lengths(self) -> list[int]:
        return [a.size for a in self.atoms]

    @property
    def max_len(self) -> int:
        return max(self.lengths)

    def copy(self) -> "Dictionary":
        return Dictionary([a.copy() for a in self.atoms], self.updates, self.created)

    def equals(self, other: "Dictionary") -> bool:
        """Bit-exact equality of all waveforms."""
        return len(self) == len(other) and all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.atoms, other.atoms))

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        for i, a in enumerate(self.atoms):
            if abs(np.linalg.norm(a) - 1.0) > tol:
                raise DictionaryError(f"atom {i} has norm {np.linalg.norm(a)!r}")


def init_dictionary(m: int = 16, length: int = 50, seed: int = 0) -> Dictionary:
    """Draw ``m`` i.i.d. standard-normal atoms of ``length`` samples and normalize them."""
    if m < 1 or length < 2:
        raise DictionaryError(f"need m >= 1 and length >= 2, got m={m}, length={length}")
    rng = np.random.default_rng(seed)
    atoms = []
    for _ in range(m):
        w = rng.standard_normal(length)
        while not np.any(w):
            w = rng.standard_normal(length)
        atoms.append(normalize_atom(w))
    return Dictionary(atoms)


@dataclass(frozen=True)
class Snapshot:
    """Immutable time-stamped copy of a dictionary."""

    dictionary: Dictionary
    stream_time: float

    def __post_init__(self):
        for a in self.dictionary.atoms:
            a.flags.writeable = False


def take_snapshot(dictionary: Dictionary, stream_time: float) -> Snapshot:
    return Snapshot(dictionary.copy(), float(stream_time))


def dumps_dictionary(dictionary: Dictionary) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(dictionary))]
    for a in dictionary.atoms:
        parts.append(struct.pack("<I", a.size))
        parts.append(a.astype("<f8").tobytes())
    return b"".join(parts)


def loads_dictionary(data: bytes) -> Dictionary:
    if len(data) < 12 or data[:4] != MAGIC:
        raise DictionaryError("not a dictionary file (bad magic)")
    version, m = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise DictionaryError(f"unsupported dictionary version {version}")
    if m == 0:
        raise DictionaryError("dictionary file holds no atoms")
    pos = 12
    atoms = []
    for i in range(m):
        if pos + 4 > len(data):
            raise DictionaryError(f"truncated dictionary file at atom {i} header")
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        end = pos + 8 * n
        if end > len(data):
            raise DictionaryError(f"truncated dictionary file in atom {i} samples")
        atoms.append(np.frombuffer(data[pos:end], dtype="<f8").astype(np.float64))
        pos = end
    if pos != len(data):
        raise DictionaryError(f"{len(data) - pos} trailing bytes after last atom")
    return Dictionary(atoms)


def save_dictionary(dictionary: Dictionary, path) -> None:
    Path(path).write_bytes(dumps_dictionary(dictionary))


def load_dictionary(path) -> Dictionary:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DictionaryError(f"cannot read dictionary {path}: {exc}") from exc
    return loads_dictionary(data)
