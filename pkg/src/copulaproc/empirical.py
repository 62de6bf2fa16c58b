"""Rank machinery and copula process estimation.

The empirical copula is computed as the empirical distribution function of
the rank pseudo-observations,

    C_n(u) = n^{-1} sum_i 1{Uhat_i <= u},   Uhat_ip = rank(X_ip) / n,

which is grounded (0 whenever some u_p = 0) and coincides on the snapped grid
{0, 1/n, ..., 1}^d with the plug-in composition of the joint ecdf with the
marginal quantile functions.  ``empirical_copula_raw`` implements that second
route independently (through order statistics and joint counting of the raw
data) and exists as a cross-check oracle.

Sequential variants accumulate the indicator sums over time prefixes
floor(s*n) and therefore require the rows of a :class:`DataMatrix` to be in
observation time order.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import Field, Grid

__all__ = [
    "TieError",
    "CsvFormatError",
    "DataMatrix",
    "PseudoSample",
    "StepCdf",
    "pseudo_observations",
    "generalized_inverse",
    "empirical_copula",
    "empirical_copula_raw",
    "copula_process",
    "sequential_process_sharp",
    "sequential_process_plus",
]


class TieError(ValueError):
    """Raised when tied observations are found under tie_policy='error'."""


class CsvFormatError(ValueError):
    """Raised for malformed numeric CSV input (bad field, NaN/Inf row)."""


@dataclass(frozen=True)
class DataMatrix:
    """n observations of a d-variate real series, rows in time order."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("data must be a non-empty 2-d array (n rows, d columns)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("data entries must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_csv(cls, path_or_file) -> "DataMatrix":
        """Read comma-separated numeric rows, UTF-8, optional header row.

        NaN/Inf entries and non-numeric fields are rejected with the
        offending file line in the message (silent row dropping would corrupt
        rank statistics).
        """
        own = isinstance(path_or_file, (str, os.PathLike))
        fh = open(path_or_file, "r", newline="", encoding="utf-8") if own else path_or_file
        try:
            reader = csv.reader(fh)
            rows: list[list[float]] = []
            width: int | None = None
            for lineno, raw in enumerate(reader, start=1):
                if not raw or all(not cell.strip() for cell in raw):
                    continue
                parsed: list[float] | None = []
                for cell in raw:
                    try:
                        parsed.append(float(cell))
                    except ValueError:
                        parsed = None
                        break
                if parsed is None:
                    if lineno == 1 and not rows:
                        continue  # header row
                    raise CsvFormatError(f"non-numeric field on line {lineno}")
                if not all(np.isfinite(parsed)):
                    raise CsvFormatError(f"non-finite value on line {lineno}")
                if width is None:
                    width = len(parsed)
                elif len(parsed) != width:
                    raise CsvFormatError(
                        f"line {lineno} has {len(parsed)} fields, expected {width}"
                    )
                rows.append(parsed)
        finally:
            if own:
                fh.close()
        if not rows:
            raise CsvFormatError("no data rows found")
        return cls(np.asarray(rows, dtype=float))


@dataclass(frozen=True)
class PseudoSample:
    """Rank pseudo-observations Uhat in (0,1]; columns of tie-free data are
    permutations of {1/n, ..., 1}."""

    u_hat: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_hat, dtype=float)
        if u.ndim != 2:
            raise ValueError("pseudo-observations must be 2-d")
        if np.any(u <= 0.0) or np.any(u > 1.0):
            raise ValueError("pseudo-observations must lie in (0, 1]")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "u_hat", u)

    @property
    def n(self) -> int:
        return self.u_hat.shape[0]

    @property
    def d(self) -> int:
        return self.u_hat.shape[1]


def pseudo_observations(x: DataMatrix, tie_policy: str = "error") -> PseudoSample:
    """Columnwise ranks divided by n.

    Parameters
    ----------
    x : DataMatrix
    tie_policy : {'error', 'average-rank'}
        'error' raises :class:`TieError` naming the first tied column;
        'average-rank' assigns tied entries the mean of their occupied rank
        positions.
    """
    if tie_policy not in ("error", "average-rank"):
        raise ValueError(f"unknown tie_policy {tie_policy!r}")
    vals = x.values
    n = x.n
    out = np.empty_like(vals)
    for p in range(x.d):
        col = vals[:, p]
        if tie_policy == "error" and np.unique(col).size < n:
            raise TieError(f"tied values in column {p}")
        out[:, p] = rankdata(col, method="average") / n
    return PseudoSample(out)


@dataclass(frozen=True)
class StepCdf:
    """One-dimensional empirical cdf: sorted jump locations and cumulative
    heights, right-continuous, heights nondecreasing from 0 to 1."""

    locations: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        hts = np.asarray(self.heights, dtype=float)
        if loc.ndim != 1 or loc.shape != hts.shape or loc.size == 0:
            raise ValueError("locations and heights must be matching 1-d arrays")
        if np.any(np.diff(loc) < 0):
            raise ValueError("locations must be sorted")
        if np.any(np.diff(hts) < 0) or hts[0] < 0 or hts[-1] > 1 + 1e-12:
            raise ValueError("heights must be nondecreasing within [0, 1]")
        loc, hts = loc.copy(), hts.copy()
        loc.setflags(write=False)
        hts.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "heights", hts)

    @classmethod
    def from_sample(cls, values) -> "StepCdf":
        vals = np.asarray(values, dtype=float).ravel()
        loc, counts = np.unique(vals, return_counts=True)
        return cls(loc, np.cumsum(counts) / vals.size)

    @classmethod
    def from_weighted(cls, values, weights) -> "StepCdf":
        vals = np.asarray(values, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if vals.shape != w.shape:
            raise ValueError("values and weights must have the same length")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        total = w.sum()
        if total <= 0:
            raise ValueError("total weight must be positive")
        order = np.argsort(vals, kind="stable")
        loc, start = np.unique(vals[order], return_index=True)
        cum = np.cumsum(w[order])
        block_end = np.append(start[1:], vals.size) - 1
        return cls(loc, cum[block_end] / total)

    def __call__(self, x) -> np.ndarray:
        idx = np.searchsorted(self.locations, np.asarray(x, dtype=float), side="right")
        padded = np.concatenate(([0.0], self.heights))
        return padded[idx]


def generalized_inverse(h: StepCdf, p: float) -> float:
    """Left-continuous quantile: inf{x : H(x) >= p} for p in (0,1], and the
    supremum of the zero set {x : H(x) = 0} for p = 0."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p == 0.0:
        idx = int(np.argmax(h.heights > 0.0))
        return float(h.locations[idx])
    idx = int(np.searchsorted(h.heights, p, side="left"))
    return float(h.locations[idx])


# ---------------------------------------------------------------------------
# grid counting engine

def _axis_buckets(axis: np.ndarray, values: np.ndarray) -> np.ndarray:
    # smallest grid index j with axis[j] >= value; indicator 1{value <= axis[j]}
    # then holds exactly for all j at or beyond the bucket
    return np.searchsorted(axis, values, side="left")

def _cumulative_counts(buckets: tuple[np.ndarray, ...], shape: tuple[int, ...],
                       weights: np.ndarray | None = None) -> np.ndarray:
    """N[j] = sum_i w_i prod_k 1{buckets[k][i] <= j_k} via scatter + cumsums."""
    flat = np.ravel_multi_index(buckets, shape)
    h = np.bincount(flat, weights=weights, minlength=int(np.prod(shape)))
    h = h.astype(float).reshape(shape)
    for ax in range(len(shape)):
        np.cumsum(h, axis=ax, out=h)
    return h

def _prefix_sizes(time_axis: np.ndarray, n: int) -> np.ndarray:
    # floor(s*n) with a snap guard so s = k/n stored in floats lands on k
    return np.floor(time_axis * n + 1e-9).astype(np.int64)

def _time_buckets(prefix: np.ndarray, n: int) -> np.ndarray:
    # row i (1-based) enters every prefix with floor(s*n) >= i
    return np.searchsorted(prefix, np.arange(1, n + 1), side="left")

def _pseudo(x, tie_policy: str) -> PseudoSample:
    return x if isinstance(x, PseudoSample) else pseudo_observations(x, tie_policy)

def _check_data_grid(d: int, grid: Grid, want_time: bool) -> None:
    if grid.dims != d:
        raise ValueError(f"grid dimension {grid.dims} does not match data dimension {d}")
    if want_time and not grid.has_time:
        raise ValueError("grid must carry a time axis")
    if not want_time and grid.has_time:
        raise ValueError("grid must not carry a time axis")


# ---------------------------------------------------------------------------
# estimators and processes

def empirical_copula(x: DataMatrix | PseudoSample, grid: Grid,
                     tie_policy: str = "error") -> Field:
    """Empirical copula C_n on a grid.

    Evaluates ``n^{-1} sum_i 1{Uhat_i <= u}`` at every grid point via a
    bucket histogram and cumulative sums, exact in O(n + #grid).
    """
    u = _pseudo(x, tie_policy)
    if u.d < 2:
        raise ValueError("copula statistics need d >= 2")
    _check_data_grid(u.d, grid, want_time=False)
    buckets = tuple(_axis_buckets(grid.axes[p], u.u_hat[:, p]) for p in range(u.d))
    counts = _cumulative_counts(buckets, grid.shape)
    return Field(grid, counts.ravel() / u.n)


def empirical_copula_raw(x: DataMatrix, grid: Grid) -> Field:
    """Plug-in route: joint ecdf composed with marginal quantile thresholds.

    Thresholds come from :func:`generalized_inverse` of each marginal step
    cdf; the count of raw rows dominated by the threshold vector is taken
    directly, without forming ranks.  At u_p = 0 the threshold is -inf
    (grounding convention), so the result vanishes on the zero faces like the
    rank form does.

    Coincides with :func:`empirical_copula` exactly at grid points whose
    coordinates are multiples of 1/n (the snapped grid); off that lattice the
    plug-in threshold rounds the rank ceiling up while the rank form rounds
    down, and the two step functions interleave.
    """
    _check_data_grid(x.d, grid, want_time=False)
    n = x.n
    buckets = []
    for p in range(x.d):
        h = StepCdf.from_sample(x.values[:, p])
        axis = grid.axes[p]
        thresholds = np.empty(axis.size)
        thresholds[0] = -np.inf
        for j in range(1, axis.size):
            thresholds[j] = generalized_inverse(h, float(axis[j]))
        buckets.append(np.searchsorted(thresholds, x.values[:, p], side="left"))
    counts = _cumulative_counts(tuple(buckets), grid.shape)
    return Field(grid, counts.ravel() / n)


def copula_process(x: DataMatrix | PseudoSample, c_true, grid: Grid,
                   tie_policy: str = "error") -> Field:
    """sqrt(n) (C_n - C) on a grid, for a known model copula C."""
    u = _pseudo(x, tie_policy)
    _check_data_grid(u.d, grid, want_time=False)
    n = u.n
    buckets = tuple(_axis_buckets(grid.axes[p], u.u_hat[:, p]) for p in range(u.d))
    counts = _cumulative_counts(buckets, grid.shape)
    c_vals = c_true.cdf(grid.points()).reshape(grid.shape)
    values = (counts - n * c_vals) / np.sqrt(n)
    return Field(grid, values.ravel())


def sequential_process_sharp(x: DataMatrix | PseudoSample, c_true, grid: Grid,
                             tie_policy: str = "error") -> Field:
    """Partial-sum process (1/sqrt(n)) sum_{i<=floor(sn)} (1{Uhat_i <= u} - C(u)).

    Restricted to s = 1 this equals :func:`copula_process` exactly, including
    in floating point.
    """
    u = _pseudo(x, tie_policy)
    _check_data_grid(u.d, grid, want_time=True)
    n = u.n
    prefix = _prefix_sizes(grid.time_axis, n)
    buckets = (_time_buckets(prefix, n),) + tuple(
        _axis_buckets(grid.axes[p], u.u_hat[:, p]) for p in range(u.d)
    )
    counts = _cumulative_counts(buckets, grid.shape)
    c_vals = c_true.cdf(grid.data_points()[: int(np.prod(grid.shape[1:]))]).reshape(
        grid.shape[1:]
    )
    scale = prefix.reshape((-1,) + (1,) * u.d).astype(float)
    values = (counts - scale * c_vals) / np.sqrt(n)
    return Field(grid, values.ravel())


def sequential_process_plus(x: DataMatrix | PseudoSample, grid: Grid,
                            tie_policy: str = "error") -> Field:
    """Self-centered partial-sum process
    (1/sqrt(n)) sum_{i<=floor(sn)} (1{Uhat_i <= u} - C_n(u)).

    Needs no copula model; vanishes identically at s = 0 and s = 1.
    """
    u = _pseudo(x, tie_policy)
    _check_data_grid(u.d, grid, want_time=True)
    n = u.n
    prefix = _prefix_sizes(grid.time_axis, n)
    buckets = (_time_buckets(prefix, n),) + tuple(
        _axis_buckets(grid.axes[p], u.u_hat[:, p]) for p in range(u.d)
    )
    counts = _cumulative_counts(buckets, grid.shape)
    if prefix[-1] != n:
        raise ValueError("time axis must end at 1")
    full = counts[-1]
    frac = (prefix / n).reshape((-1,) + (1,) * u.d)
    values = (counts - frac * full) / np.sqrt(n)
    return Field(grid, values.ravel())


def _column_sort_state(x: DataMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-column sort order and right-continuous positions, precomputed once
    per dataset for weighted-ecdf evaluation (shared with the resampler)."""
    n, d = x.n, x.d
    orders = np.empty((d, n), dtype=np.int64)
    positions = np.empty((d, n), dtype=np.int64)
    for p in range(d):
        col = x.values[:, p]
        order = np.argsort(col, kind="stable")
        orders[p] = order
        positions[p] = np.searchsorted(col[order], col, side="right")
    return orders, positions
