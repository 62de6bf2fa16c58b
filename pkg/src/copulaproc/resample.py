"""Bootstrap weight schemes and bootstrapped empirical copula processes.

All schemes produce a non-negative weight vector (M_1, ..., M_n) with
sum M_i = n (exactly for the integer-valued multinomial and block schemes,
up to a few ulps after normalization for the multiplier scheme):

* multiplier   -- M_i = n xi_i / sum(xi) for i.i.d. non-negative xi with
                  mean 1 and variance 1 (standard exponential by default);
* multinomial  -- (M_1, ..., M_n) ~ Multinomial(n; 1/n, ..., 1/n), the
                  classical resample-with-replacement bootstrap;
* block        -- k = ceil(n/l) block start points drawn uniformly from
                  {0, ..., n-l}; each selected block contributes its l
                  consecutive indices (the last block is shortened so that
                  exactly n indices are selected), and M_j counts how often
                  index j was selected.  Preserves serial dependence.

The bootstrapped copula C_{n,b} is the weighted-rank plug-in: weighted
marginal ecdfs evaluated at own observations give weighted pseudo-observations
Uhat^b, and C_{n,b}(u) is their weighted ecdf.  With unit weights this
reproduces the empirical copula exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, RandomStream
from .empirical import (
    DataMatrix,
    _axis_buckets,
    _column_sort_state,
    _cumulative_counts,
    _prefix_sizes,
    _time_buckets,
)

__all__ = [
    "WeightScheme",
    "WeightVector",
    "default_block_len",
    "block_weights_from_starts",
    "draw_weights",
    "weighted_pseudo_observations",
    "bootstrap_copula",
    "bootstrap_process",
    "bootstrap_replicates",
]


def default_block_len(n: int) -> int:
    """Standard-order block length floor(n^{1/3}), at least 1."""
    return max(1, int(math.floor(round(n ** (1.0 / 3.0), 12))))


@dataclass(frozen=True)
class WeightScheme:
    """Bootstrap weight generator description.

    ``multiplier_dist`` selects the multiplier law: 'exponential' (default;
    mean 1, variance 1, non-negative) or 'constant' (degenerate xi = 1, for
    diagnostics only).  ``block_len`` of None means floor(n^{1/3}) at draw
    time.
    """

    kind: str
    multiplier_dist: str = "exponential"
    block_len: int | None = None

    def __post_init__(self):
        if self.kind not in ("multiplier", "multinomial", "block"):
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if self.multiplier_dist not in ("exponential", "constant"):
            raise ValueError(f"unknown multiplier distribution {self.multiplier_dist!r}")
        if self.block_len is not None and self.block_len < 1:
            raise ValueError("block length must be >= 1")

    @classmethod
    def multiplier(cls, dist: str = "exponential") -> "WeightScheme":
        return cls(kind="multiplier", multiplier_dist=dist)

    @classmethod
    def multinomial(cls) -> "WeightScheme":
        return cls(kind="multinomial")

    @classmethod
    def block(cls, block_len: int | None = None) -> "WeightScheme":
        return cls(kind="block", block_len=block_len)

    def spec(self) -> dict:
        out = {"scheme": self.kind}
        if self.kind == "multiplier":
            out["multiplier_dist"] = self.multiplier_dist
        if self.kind == "block":
            out["block_len"] = self.block_len
        return out


@dataclass(frozen=True)
class WeightVector:
    """One realized weight vector; non-negative with sum equal to n."""

    m: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.m, dtype=float).ravel()
        if arr.size < 1 or np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("weights must be a non-empty non-negative finite vector")
        n = arr.size
        if abs(arr.sum() - n) > 64 * np.spacing(float(n)):
            raise ValueError("weights must sum to the sample size")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "m", arr)

    @property
    def n(self) -> int:
        return self.m.size


def block_weights_from_starts(starts, n: int, block_len: int) -> np.ndarray:
    """Index multiplicities for given block start points (0-based).

    Block i covers indices start_i, ..., start_i + l - 1; the final block is
    truncated so that exactly n indices are selected in total.
    """
    starts = np.asarray(starts, dtype=np.int64)
    k = starts.size
    if k != math.ceil(n / block_len):
        raise ValueError("number of starts must be ceil(n / block_len)")
    if np.any(starts < 0) or np.any(starts > n - block_len):
        raise ValueError("block starts must lie in {0, ..., n - block_len}")
    last_len = n - (k - 1) * block_len
    offsets = np.arange(block_len)
    positions = (starts[:-1, None] + offsets[None, :]).ravel()
    positions = np.concatenate([positions, starts[-1] + np.arange(last_len)])
    return np.bincount(positions, minlength=n).astype(float)


def draw_weights(scheme: WeightScheme, n: int, rng: RandomStream) -> WeightVector:
    """One weight vector from the scheme, deterministic per stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.generator()
    if scheme.kind == "multiplier":
        if scheme.multiplier_dist == "constant":
            xi = np.ones(n)
        else:
            xi = gen.standard_exponential(n)
        m = xi * (n / xi.sum())
        m *= n / m.sum()  # second pass pins the total to n within a few ulps
        return WeightVector(m)
    if scheme.kind == "multinomial":
        m = gen.multinomial(n, np.full(n, 1.0 / n)).astype(float)
        return WeightVector(m)
    l = scheme.block_len if scheme.block_len is not None else default_block_len(n)
    if l > n:
        raise ValueError(f"block length {l} exceeds sample size {n}")
    k = math.ceil(n / l)
    starts = gen.integers(0, n - l + 1, size=k)
    return WeightVector(block_weights_from_starts(starts, n, l))


class WeightedCopulaEvaluator:
    """Repeated weighted-copula evaluation against one dataset and grid.

    Column sort orders, right-continuous positions and grid buckets are
    precomputed once; each call with a fresh weight vector then costs
    O(n d + #grid).  Assumes tie-free columns (continuous data).
    """

    def __init__(self, x: DataMatrix, grid: Grid):
        if grid.dims != x.d:
            raise ValueError("grid dimension does not match the data")
        self.x = x
        self.grid = grid
        self.n = x.n
        self.d = x.d
        self.orders, self.positions = _column_sort_state(x)
        self._unit_buckets: tuple[np.ndarray, ...] | None = None
        if grid.has_time:
            self.prefix = _prefix_sizes(grid.time_axis, self.n)
            self.time_buckets = _time_buckets(self.prefix, self.n)
        else:
            self.prefix = None
            self.time_buckets = None

    def pseudo(self, weights: np.ndarray | None) -> np.ndarray:
        """Weighted pseudo-observations, each column normalized by its own
        cumulative total so the top of every margin is exactly 1."""
        n, d = self.n, self.d
        u = np.empty((n, d))
        if weights is None:
            for p in range(d):
                u[:, p] = self.positions[p] / n
            return u
        for p in range(d):
            cum = np.cumsum(weights[self.orders[p]])
            u[:, p] = cum[self.positions[p] - 1] / cum[-1]
        return u

    def _buckets(self, u_hat: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(
            _axis_buckets(self.grid.axes[p], u_hat[:, p]) for p in range(self.d)
        )

    def copula_values(self, weights: np.ndarray | None = None) -> np.ndarray:
        """C_{n,b} over the (time-free) grid, shape ``grid.shape``.

        Normalized by the accumulated weight total (the value at the all-ones
        corner), so C_{n,b}(1, ..., 1) = 1 exactly for every weight vector.
        """
        u_hat = self.pseudo(weights)
        counts = _cumulative_counts(self._buckets(u_hat), self.grid.shape, weights)
        corner = counts[(-1,) * self.d]
        return counts / corner

    def prefix_counts(self, weights: np.ndarray | None = None) -> np.ndarray:
        """Weighted prefix counts N_b(s, u) = sum_{i <= floor(sn)} M_i 1{Uhat^b_i <= u},
        with the pseudo-observations re-ranked under the weights."""
        if self.time_buckets is None:
            raise ValueError("grid has no time axis")
        u_hat = self.pseudo(weights)
        buckets = (self.time_buckets,) + self._buckets(u_hat)
        return _cumulative_counts(buckets, self.grid.shape, weights)

    def prefix_counts_fixed_ranks(self, weights: np.ndarray) -> np.ndarray:
        """sum_{i <= floor(sn)} w_i 1{Uhat_i <= u} with the original (unit-weight)
        pseudo-observations; ``weights`` may be negative (e.g. centered)."""
        if self.time_buckets is None:
            raise ValueError("grid has no time axis")
        if self._unit_buckets is None:
            self._unit_buckets = self._buckets(self.pseudo(None))
        buckets = (self.time_buckets,) + self._unit_buckets
        return _cumulative_counts(buckets, self.grid.shape, weights)

    def prefix_weight_sums(self, weights: np.ndarray) -> np.ndarray:
        """sum_{i <= floor(sn)} w_i along the time grid."""
        if self.time_buckets is None:
            raise ValueError("grid has no time axis")
        per_bucket = np.bincount(self.time_buckets, weights=weights,
                                 minlength=len(self.prefix))
        return np.cumsum(per_bucket)


def weighted_pseudo_observations(x: DataMatrix, w: WeightVector) -> np.ndarray:
    """Uhat^b_ip: the weighted marginal ecdf evaluated at X_ip, each column
    normalized by its own cumulative weight total."""
    if w.n != x.n:
        raise ValueError("weight vector length must equal the sample size")
    orders, positions = _column_sort_state(x)
    u = np.empty((x.n, x.d))
    for p in range(x.d):
        cum = np.cumsum(w.m[orders[p]])
        u[:, p] = cum[positions[p] - 1] / cum[-1]
    return u


def bootstrap_copula(x: DataMatrix, w: WeightVector, grid: Grid) -> Field:
    """Bootstrapped empirical copula C_{n,b} on a grid.

    Weighted marginal ecdfs are composed with the weighted joint ecdf through
    the weighted pseudo-observations; with w = (1, ..., 1) the result equals
    :func:`~copulaproc.empirical.empirical_copula` exactly.
    """
    if w.n != x.n:
        raise ValueError("weight vector length must equal the sample size")
    ev = WeightedCopulaEvaluator(x, grid)
    return Field(grid, ev.copula_values(w.m).ravel())


def bootstrap_process(x: DataMatrix, w: WeightVector, grid: Grid) -> Field:
    """sqrt(n) (C_{n,b} - C_n) on a grid."""
    ev = WeightedCopulaEvaluator(x, grid)
    cb = ev.copula_values(w.m)
    cn = ev.copula_values(None)
    return Field(grid, (np.sqrt(x.n) * (cb - cn)).ravel())


def bootstrap_replicates(x: DataMatrix, scheme: WeightScheme, grid: Grid, B: int,
                         functional, rng: RandomStream) -> list[float]:
    """B functional evaluations of independent bootstrap_process fields.

    Replicate b draws its weights from ``rng.child(b)``, so the output is a
    pure function of (data, scheme, grid, B, stream) and does not depend on
    any worker schedule.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    ev = WeightedCopulaEvaluator(x, grid)
    cn = ev.copula_values(None)
    root_n = np.sqrt(x.n)
    out = []
    for b in range(B):
        w = draw_weights(scheme, x.n, rng.child(b))
        cb = ev.copula_values(w.m)
        out.append(float(functional(Field(grid, (root_n * (cb - cn)).ravel()))))
    return out
