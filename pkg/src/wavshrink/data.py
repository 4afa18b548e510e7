"""Synthetic saccade-task corpora and the ``.lfpc`` container.

Each trial is a ``n_channels x n_samples`` matrix drawn from

    Y[c, l] = gain[c] * f_class(l / n) + offset[session, c](l / n) + sigma * Z[c, l]

where ``f_class`` is a closed-form prototype for one (direction, task) pair.
Two prototype regimes exist: ``bumps`` (smooth Gaussian bumps, where Fourier
and wavelet features should do equally well) and ``spikes`` (biphasic boxes
aligned with the Haar grid, sparse in the wavelet basis).
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .decoder import ClassFamily, PrototypeClass
from .rng import seed_of, stream

__all__ = [
    "N_DIRECTIONS",
    "TASKS",
    "PrototypeStyle",
    "GeneratorSpec",
    "PRESETS",
    "preset",
    "Trial",
    "Dataset",
    "prototype_function",
    "make_prototypes",
    "generate",
    "save",
    "load",
    "to_bytes",
    "from_bytes",
    "import_csv",
    "ContainerError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedError",
    "ShapeError",
    "HeaderError",
    "CsvImportError",
    "EmptyDatasetError",
]

N_DIRECTIONS = 8
TASKS = ("memory", "delayed")


class PrototypeStyle(str, Enum):
    BUMPS = "bumps"
    SPIKES = "spikes"
    MIXED = "mixed"


@dataclass(frozen=True)
class GeneratorSpec:
    style: PrototypeStyle = PrototypeStyle.BUMPS
    amplitude: float = 1.0
    sigma: float = 1.0
    n_sessions: int = 9
    trials_per_class_per_session: int = 10
    session_effect: float = 0.2
    channel_gain_spread: float = 0.1
    n_channels: int = 32
    n_samples: int = 500
    sample_rate_hz: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "style", PrototypeStyle(self.style))
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        for name in ("n_sessions", "trials_per_class_per_session", "n_channels", "n_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.session_effect < 0 or self.channel_gain_spread < 0:
            raise ValueError("session_effect and channel_gain_spread must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["style"] = self.style.value
        return d


PRESETS: dict[str, GeneratorSpec] = {
    # 9 sessions x 16 (direction, task) cells x 10 trials = 1440 trials of 32 x 500.
    "paper-shape": GeneratorSpec(),
    # Smaller corpora for the Fourier-vs-wavelet comparison.
    "bumps-small": GeneratorSpec(
        style="bumps", sigma=2.0, n_sessions=4, trials_per_class_per_session=8,
        n_channels=4, n_samples=512,
    ),
    "spikes-small": GeneratorSpec(
        style="spikes", sigma=2.0, n_sessions=4, trials_per_class_per_session=8,
        n_channels=4, n_samples=512,
    ),
}


def preset(name: str, **overrides) -> GeneratorSpec:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


# Prototype shapes -----------------------------------------------------------

_BUMP_WIDTH = {0: 0.025, 1: 0.045}
_SPIKE_HALF = 1 / 64


def _bump(center, width):
    return lambda t: np.exp(-0.5 * ((t - center) / width) ** 2)


def _biphasic(start):
    def f(t):
        up = (t >= start) & (t < start + _SPIKE_HALF)
        down = (t >= start + _SPIKE_HALF) & (t < start + 2 * _SPIKE_HALF)
        return up.astype(float) - down.astype(float)

    return f


def prototype_function(style, direction: int, task: int, amplitude: float = 1.0) -> Callable:
    """Closed-form class function f(t) on [0, 1] for one (direction, task) cell.

    bumps: Gaussian bump centred at (direction - 1/2)/8, narrow for memory
    trials and wide for delayed ones.
    spikes: a biphasic spike at (direction - 1)/8 followed 1/16 later by a
    second spike whose polarity flips with the task. Every spike is one Haar
    wavelet at level 5, so the shape is sparse in the Haar basis.
    mixed: the sum of both.
    """
    style = PrototypeStyle(style)
    if not 1 <= direction <= N_DIRECTIONS or task not in (0, 1):
        raise ValueError(f"bad class ({direction}, {task})")
    if style is PrototypeStyle.BUMPS:
        parts = [_bump((direction - 0.5) / N_DIRECTIONS, _BUMP_WIDTH[task])]
    elif style is PrototypeStyle.SPIKES:
        u = (direction - 1) / N_DIRECTIONS
        first, second = _biphasic(u), _biphasic(u + 1 / 16)
        sign = 1.0 if task == 0 else -1.0
        parts = [first, lambda t: sign * second(t)]
    else:
        return lambda t: prototype_function("bumps", direction, task, amplitude)(t) + prototype_function(
            "spikes", direction, task, amplitude
        )(t)
    return lambda t: amplitude * sum(p(np.asarray(t, dtype=float)) for p in parts)


def _grid(n):
    return np.arange(n) / n


def _cell_prototypes(spec: GeneratorSpec, n: int) -> np.ndarray:
    """(8, 2, n) array of class functions on the grid l/n."""
    t = _grid(n)
    return np.array(
        [[prototype_function(spec.style, d, k, spec.amplitude)(t) for k in (0, 1)] for d in range(1, N_DIRECTIONS + 1)]
    )


def make_prototypes(spec: GeneratorSpec, N: int, view: str = "direction") -> ClassFamily:
    """Prototype family on an N-point grid.

    ``direction``: 8 classes, each holding its memory and delayed prototypes.
    ``task``: 2 classes (1 = memory, 2 = delayed) of 8 prototypes each.
    ``joint``: 16 singleton classes, label ``2*(direction-1) + task + 1``.
    """
    if N < 64:
        raise ValueError("prototype grids need at least 64 points")
    P = _cell_prototypes(spec, N)
    if view == "direction":
        classes = [PrototypeClass(d + 1, P[d]) for d in range(N_DIRECTIONS)]
    elif view == "task":
        classes = [PrototypeClass(k + 1, P[:, k]) for k in (0, 1)]
    elif view == "joint":
        classes = [PrototypeClass(2 * d + k + 1, P[d, k]) for d in range(N_DIRECTIONS) for k in (0, 1)]
    else:
        raise ValueError(f"unknown view {view!r}")
    return ClassFamily(classes)


# Corpus ---------------------------------------------------------------------

@dataclass(frozen=True)
class Trial:
    samples: np.ndarray
    direction: int
    task: int
    session: int
    trial_id: int

    @property
    def task_name(self) -> str:
        return TASKS[self.task]


@dataclass
class Dataset:
    """Column store for a corpus: ``samples`` is (n_trials, n_channels, n_samples).

    ``direction`` runs 1..8, ``task`` is 0 (memory) or 1 (delayed).
    """

    samples: np.ndarray
    direction: np.ndarray
    task: np.ndarray
    session: np.ndarray
    trial_id: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 3:
            raise ValueError("samples must be (n_trials, n_channels, n_samples)")
        n = self.samples.shape[0]
        self.direction = np.asarray(self.direction, dtype=np.int64).reshape(n)
        self.task = np.asarray(self.task, dtype=np.int64).reshape(n)
        self.session = np.asarray(self.session, dtype=np.int64).reshape(n)
        self.trial_id = np.asarray(self.trial_id, dtype=np.int64).reshape(n)
        if n and (self.direction.min() < 1 or self.direction.max() > N_DIRECTIONS):
            raise ValueError("direction labels must be in 1..8")
        if n and not np.isin(self.task, (0, 1)).all():
            raise ValueError("task labels must be 0 (memory) or 1 (delayed)")
        if not np.isfinite(self.samples).all():
            raise ValueError("samples must be finite")
        if n:
            sessions = np.unique(self.session)
            if sessions.size != sessions[-1] - sessions[0] + 1:
                raise ValueError(f"session ids are not contiguous: {sessions.tolist()}")
        self.meta.setdefault("n_channels", self.samples.shape[1])
        self.meta.setdefault("n_samples", self.samples.shape[2])
        self.meta.setdefault("sample_rate_hz", 1000.0)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[2]

    def __getitem__(self, i) -> Trial:
        return Trial(self.samples[i], int(self.direction[i]), int(self.task[i]), int(self.session[i]), int(self.trial_id[i]))

    @property
    def trials(self) -> Iterator[Trial]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_trials(cls, trials, meta=None) -> "Dataset":
        trials = list(trials)
        shapes = {np.shape(t.samples) for t in trials}
        if len(shapes) > 1:
            raise ValueError(f"trials have different shapes: {sorted(shapes)}")
        return cls(
            np.array([t.samples for t in trials]),
            [t.direction for t in trials],
            [t.task for t in trials],
            [t.session for t in trials],
            [t.trial_id for t in trials],
            dict(meta or {}),
        )

    def labels(self, target: str = "direction") -> np.ndarray:
        """Class labels: ``direction`` (1..8) or ``type`` (1 memory, 2 delayed)."""
        if target == "direction":
            return self.direction.copy()
        if target in ("type", "task"):
            return self.task + 1
        raise ValueError(f"unknown target {target!r}")

    def equals(self, other: "Dataset") -> bool:
        return (
            self.samples.shape == other.samples.shape
            and np.array_equal(self.samples, other.samples)
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("direction", "task", "session", "trial_id"))
        )


def _session_offsets(spec: GeneratorSpec, seed) -> np.ndarray:
    """(n_sessions, n_channels, n_samples) low-frequency random offsets."""
    t = _grid(spec.n_samples)
    k = np.arange(1, 4)
    basis = np.concatenate([np.cos(2 * np.pi * np.outer(k, t)), np.sin(2 * np.pi * np.outer(k, t))]) / np.r_[k, k][:, None]
    out = np.empty((spec.n_sessions, spec.n_channels, spec.n_samples))
    for s in range(spec.n_sessions):
        coef = spec.session_effect * stream(seed, 2, s).standard_normal((spec.n_channels, basis.shape[0]))
        out[s] = coef @ basis
    return out


def generate(spec: GeneratorSpec, seed=0) -> Dataset:
    """Draw a balanced corpus: every (session, direction, task) cell holds
    ``trials_per_class_per_session`` trials. Noise for each trial comes from its
    own stream keyed by (session, direction, task, repeat), so regenerating with
    ``sigma=0`` and the same seed yields exactly the noiseless part."""
    seed_int = seed_of(seed)
    protos = _cell_prototypes(spec, spec.n_samples)
    gains = np.exp(spec.channel_gain_spread * stream(seed_int, 1).standard_normal(spec.n_channels))
    offsets = _session_offsets(spec, seed_int)
    reps = spec.trials_per_class_per_session
    n = spec.n_sessions * N_DIRECTIONS * 2 * reps
    samples = np.empty((n, spec.n_channels, spec.n_samples))
    direction = np.empty(n, dtype=np.int64)
    task = np.empty(n, dtype=np.int64)
    session = np.empty(n, dtype=np.int64)
    i = 0
    for s in range(spec.n_sessions):
        for d in range(N_DIRECTIONS):
            for k in (0, 1):
                clean = gains[:, None] * protos[d, k][None, :] + offsets[s]
                for r in range(reps):
                    noise = stream(seed_int, 0, s, d, k, r).standard_normal(clean.shape)
                    samples[i] = clean + spec.sigma * noise
                    direction[i], task[i], session[i] = d + 1, k, s + 1
                    i += 1
    meta = {
        "n_channels": spec.n_channels,
        "n_samples": spec.n_samples,
        "sample_rate_hz": spec.sample_rate_hz,
        "generator": spec.to_dict(),
        "seed": seed_int,
    }
    return Dataset(samples, direction, task, session, np.arange(n), meta)


# Binary container -------------------------------------------------------------

MAGIC = b"LFPC"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class ContainerError(ValueError):
    """Base class for malformed ``.lfpc`` files."""


class BadMagicError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


class ShapeError(ContainerError):
    pass


class HeaderError(ContainerError):
    pass


def _record_dtype(n_channels, n_samples):
    return np.dtype(
        [
            ("direction", "u1"),
            ("task", "u1"),
            ("session", "<u2"),
            ("trial_id", "<u4"),
            ("samples", "<f8", (n_channels, n_samples)),
        ]
    )


def to_bytes(dataset: Dataset) -> bytes:
    header = {
        "n_trials": len(dataset),
        "n_channels": dataset.n_channels,
        "n_samples": dataset.n_samples,
        "sample_rate_hz": dataset.meta.get("sample_rate_hz", 1000.0),
        "seed": dataset.meta.get("seed"),
        "generator": dataset.meta.get("generator"),
        "label_tables": {"direction": list(range(1, N_DIRECTIONS + 1)), "task": list(TASKS)},
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    rec = np.empty(len(dataset), dtype=_record_dtype(dataset.n_channels, dataset.n_samples))
    rec["direction"] = dataset.direction
    rec["task"] = dataset.task
    rec["session"] = dataset.session
    rec["trial_id"] = dataset.trial_id
    rec["samples"] = dataset.samples
    return _PREFIX.pack(MAGIC, VERSION, len(hbytes)) + hbytes + rec.tobytes()


def from_bytes(buf: bytes) -> Dataset:
    if len(buf) < _PREFIX.size:
        raise TruncatedError(f"file is {len(buf)} bytes, shorter than the {_PREFIX.size}-byte prefix")
    magic, version, hlen = _PREFIX.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"container version {version}, this reader handles {VERSION}")
    end = _PREFIX.size + hlen
    if len(buf) < end:
        raise TruncatedError("header extends past end of file")
    try:
        header = json.loads(buf[_PREFIX.size : end].decode("utf-8"))
        n, C, S = (int(header[k]) for k in ("n_trials", "n_channels", "n_samples"))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise HeaderError(f"unreadable header: {exc}") from exc
    if n < 0 or C < 1 or S < 1:
        raise ShapeError(f"invalid shape n_trials={n}, n_channels={C}, n_samples={S}")
    dt = _record_dtype(C, S)
    payload = len(buf) - end
    if payload < n * dt.itemsize:
        raise TruncatedError(f"payload holds {payload} bytes, header promises {n} trials of {dt.itemsize} bytes")
    if payload != n * dt.itemsize:
        raise ShapeError(f"payload of {payload} bytes is not {n} records of {dt.itemsize} bytes")
    rec = np.frombuffer(buf, dtype=dt, count=n, offset=end)
    meta = {
        "n_channels": C,
        "n_samples": S,
        "sample_rate_hz": header.get("sample_rate_hz", 1000.0),
        "generator": header.get("generator"),
        "seed": header.get("seed"),
    }
    try:
        return Dataset(
            rec["samples"].copy(), rec["direction"], rec["task"], rec["session"], rec["trial_id"], meta
        )
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc


def save(dataset: Dataset, path) -> None:
    Path(path).write_bytes(to_bytes(dataset))


def load(path) -> Dataset:
    return from_bytes(Path(path).read_bytes())


# CSV import -------------------------------------------------------------------

class CsvImportError(ValueError):
    pass


class EmptyDatasetError(CsvImportError):
    pass


def _task_code(value: str, line: int) -> int:
    v = value.strip().lower()
    if v in ("memory", "0"):
        return 0
    if v in ("delayed", "delay", "1"):
        return 1
    raise CsvImportError(f"line {line}: task label {value!r} is not memory/delayed")


def import_csv(path, manifest) -> Dataset:
    """Read a long-format CSV: one row per time sample of one trial.

    `manifest` (dict or path to JSON) names the columns::

        {"trial": "trial", "session": "session", "direction": "direction",
         "task": "task", "channels": ["ch0", "ch1"], "n_directions": 8,
         "sample_rate_hz": 1000}

    Rows of a trial must be consecutive and in time order.
    """
    if not isinstance(manifest, dict):
        manifest = json.loads(Path(manifest).read_text())
    try:
        role = {k: manifest[k] for k in ("trial", "session", "direction", "task")}
        channels = list(manifest["channels"])
    except KeyError as exc:
        raise CsvImportError(f"manifest lacks {exc.args[0]!r}") from None
    if not channels:
        raise CsvImportError("manifest lists no channel columns")
    m = int(manifest.get("n_directions", N_DIRECTIONS))

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError("CSV file is empty") from None
        missing = [c for c in list(role.values()) + channels if c not in header]
        if missing:
            raise CsvImportError(f"missing columns: {missing}")
        col = {c: header.index(c) for c in list(role.values()) + channels}
        trials: dict[int, dict] = {}
        order: list[int] = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvImportError(f"line {line}: {len(row)} cells, header has {len(header)}")
            try:
                tid = int(row[col[role["trial"]]])
                sess = int(row[col[role["session"]]])
                direction = int(row[col[role["direction"]]])
                values = [float(row[col[c]]) for c in channels]
            except ValueError as exc:
                raise CsvImportError(f"line {line}: non-numeric cell ({exc})") from None
            task = _task_code(row[col[role["task"]]], line)
            if not 1 <= direction <= min(m, N_DIRECTIONS):
                raise CsvImportError(f"line {line}: direction {direction} outside 1..{m}")
            if not all(math.isfinite(v) for v in values):
                raise CsvImportError(f"line {line}: non-finite sample")
            if tid not in trials:
                trials[tid] = {"labels": (direction, task, sess), "rows": [], "line": line}
                order.append(tid)
            elif order[-1] != tid:
                raise CsvImportError(f"line {line}: rows of trial {tid} are not consecutive")
            elif trials[tid]["labels"] != (direction, task, sess):
                raise CsvImportError(f"line {line}: labels change within trial {tid}")
            trials[tid]["rows"].append(values)

    if not order:
        raise EmptyDatasetError("CSV file has a header but no data rows")
    lengths = {tid: len(trials[tid]["rows"]) for tid in order}
    n_samples = lengths[order[0]]
    for tid in order:
        if lengths[tid] != n_samples:
            raise CsvImportError(
                f"line {trials[tid]['line']}: trial {tid} has {lengths[tid]} samples, expected {n_samples}"
            )
    samples = np.array([np.asarray(trials[t]["rows"]).T for t in order])
    d, k, s = (np.array([trials[t]["labels"][i] for t in order]) for i in range(3))
    meta = {"sample_rate_hz": float(manifest.get("sample_rate_hz", 1000.0)), "source": str(path)}
    return Dataset(samples, d, k, s, np.array(order), meta)
