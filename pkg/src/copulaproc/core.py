"""Shared deterministic primitives: evaluation grids on the unit cube,
real-valued fields on those grids, sup-norms, and seeded random streams.

Everything here is immutable after construction and safe to share across
workers; a ``RandomStream`` is a value object describing a stream, not a
stateful generator, so two calls with the same stream reproduce the same
draws.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "RandomStream",
    "make_uniform_grid",
    "snapped_grid",
    "sup_norm",
    "parallel_map",
    "thread_count",
]


def _as_axis(values) -> np.ndarray:
    ax = np.asarray(values, dtype=float)
    if ax.ndim != 1 or ax.size < 2:
        raise ValueError("grid axis must be a 1-d array with at least 2 points")
    if not np.all(np.diff(ax) > 0):
        raise ValueError("grid axis values must be strictly increasing")
    if ax[0] != 0.0 or ax[-1] != 1.0:
        raise ValueError("grid axis must start at 0 and end at 1")
    ax.setflags(write=False)
    return ax


@dataclass(frozen=True)
class Grid:
    """Finite product lattice on [0,1]^d, optionally crossed with a time axis.

    ``axes`` holds one strictly increasing coordinate array per data axis;
    every axis contains 0 and 1.  Field values over the grid are stored flat
    in row-major order with the time axis (when present) slowest, which fixes
    a bit-exact serialization order.
    """

    axes: tuple[np.ndarray, ...]
    time_axis: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(_as_axis(a) for a in self.axes))
        if len(self.axes) < 1:
            raise ValueError("grid needs at least one data axis")
        if self.time_axis is not None:
            object.__setattr__(self, "time_axis", _as_axis(self.time_axis))

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def has_time(self) -> bool:
        return self.time_axis is not None

    @property
    def shape(self) -> tuple[int, ...]:
        data = tuple(len(a) for a in self.axes)
        if self.time_axis is not None:
            return (len(self.time_axis),) + data
        return data

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All grid coordinates, one row per point, in storage order.

        With a time axis the first column is time.
        """
        seq = ((self.time_axis,) if self.time_axis is not None else ()) + self.axes
        mesh = np.meshgrid(*seq, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def data_points(self) -> np.ndarray:
        """Cube coordinates only (time column dropped)."""
        pts = self.points()
        return pts[:, 1:] if self.has_time else pts

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        if self.dims != other.dims or self.has_time != other.has_time:
            return False
        same_axes = all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
        if not same_axes:
            return False
        if self.has_time:
            return np.array_equal(self.time_axis, other.time_axis)
        return True

    def __hash__(self):
        key = tuple(tuple(a.tolist()) for a in self.axes)
        tkey = tuple(self.time_axis.tolist()) if self.has_time else None
        return hash((key, tkey))


@dataclass(frozen=True)
class Field:
    """Real values attached to every point of a :class:`Grid`.

    Values are stored as a flat float array in the grid's storage order and
    must all be finite.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.grid.npoints:
            raise ValueError(
                f"field has {vals.size} values for a grid of {self.grid.npoints} points"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def reshaped(self) -> np.ndarray:
        """Values as an ndarray of shape ``grid.shape`` (read-only view)."""
        return self.values.reshape(self.grid.shape)

    def __add__(self, other: "Field") -> "Field":
        self._check_same_grid(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check_same_grid(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def _check_same_grid(self, other: "Field") -> None:
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def to_json(self) -> dict:
        obj = {
            "grid": {
                "axes": [a.tolist() for a in self.grid.axes],
                "time_axis": self.grid.time_axis.tolist() if self.grid.has_time else None,
            },
            "values": self.values.tolist(),
        }
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Field":
        g = Grid(
            axes=tuple(np.asarray(a, float) for a in obj["grid"]["axes"]),
            time_axis=None
            if obj["grid"]["time_axis"] is None
            else np.asarray(obj["grid"]["time_axis"], float),
        )
        return cls(g, np.asarray(obj["values"], float))

    def to_csv(self, path_or_file) -> None:
        """One row per grid point: coordinates (time first when present), then value."""
        pts = self.grid.points()
        own = isinstance(path_or_file, (str, os.PathLike))
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            writer = csv.writer(fh)
            cols = (["t"] if self.grid.has_time else []) + [
                f"u{p + 1}" for p in range(self.grid.dims)
            ]
            writer.writerow(cols + ["value"])
            for coords, v in zip(pts, self.values):
                writer.writerow([repr(float(c)) for c in coords] + [repr(float(v))])
        finally:
            if own:
                fh.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def make_uniform_grid(d: int, m: int, with_time: bool = False) -> Grid:
    """Uniform grid {0, 1/(m-1), ..., 1}^d, with an identical time axis on request."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if m < 2:
        raise ValueError("need at least 2 points per axis")
    ax = np.linspace(0.0, 1.0, m)
    return Grid(axes=tuple(ax.copy() for _ in range(d)),
                time_axis=ax.copy() if with_time else None)


def snapped_grid(n: int, d: int, with_time: bool = False) -> Grid:
    """Grid {0, 1/n, ..., 1}^d aligned with the jump points of rank statistics
    from a sample of size n; suprema of those step functions are exact on it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ax = np.arange(n + 1) / n
    return Grid(axes=tuple(ax.copy() for _ in range(d)),
                time_axis=ax.copy() if with_time else None)


def sup_norm(f: Field) -> float:
    """Maximum absolute value over the grid."""
    if f.values.size == 0:
        raise ValueError("sup_norm of an empty field")
    return float(np.max(np.abs(f.values)))


@dataclass(frozen=True)
class RandomStream:
    """Deterministic, independently seeded stream of randomness.

    Identical ``(seed, stream_id)`` always reproduces the same draws; distinct
    ``stream_id`` values give statistically independent streams (hierarchical
    seed-sequence construction).  Instances are immutable; use :meth:`child`
    to derive per-task substreams so results do not depend on worker count or
    schedule.
    """

    seed: int
    stream_id: int = 0
    _path: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")
        if int(self.stream_id) < 0:
            raise ValueError("stream_id must be non-negative")

    def child(self, k: int) -> "RandomStream":
        """Substream k of this stream; children with distinct k are independent."""
        if k < 0:
            raise ValueError("child index must be non-negative")
        return RandomStream(self.seed, self.stream_id, self._path + (int(k),))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_id),) + self._path
        )
        return np.random.Generator(np.random.PCG64(ss))


def thread_count() -> int:
    """Worker cap from COPULA_PROC_THREADS (default 1)."""
    raw = os.environ.get("COPULA_PROC_THREADS", "1")
    try:
        k = int(raw)
    except ValueError as exc:
        raise ValueError(f"COPULA_PROC_THREADS must be an integer, got {raw!r}") from exc
    return max(1, k)


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Map ``fn`` over ``items``, preserving order.

    Results are identical for any worker count: each item carries its own
    task index / stream, and outputs are collected in input order.
    """
    items = list(items)
    k = thread_count() if workers is None else max(1, workers)
    if k == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * k))
    with ProcessPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def jsonify(obj):
    """Recursively convert numpy scalars/arrays so ``json.dumps`` accepts them."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_report(report: dict) -> str:
    """Canonical JSON serialization used for byte-identical report comparison."""
    return json.dumps(jsonify(report), sort_keys=True, indent=2) + "\n"
