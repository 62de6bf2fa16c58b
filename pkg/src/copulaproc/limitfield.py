"""Gaussian limit fields on grids and the delta-method field transforms.

Two covariance kinds are supported on a finite grid:

* ``iid_copula(c)``: Gamma(u, v) = C(u ^ v) - C(u) C(v) on [0,1]^d, the
  covariance of the limiting field of the standard empirical process built
  from independent rows with copula C;
* ``kiefer_mueller(c)``: ((s,u), (t,v)) -> (s ^ t)(C(u ^ v) - C(u) C(v)) on
  [0,1]^{d+1}, its sequential (partial-sum) analogue.

Draws come from a symmetric eigenfactorization of the grid covariance matrix;
grid points whose variance is exactly zero (any zero coordinate, the all-ones
corner, time zero) are forced to exact 0 so that samples live on the same
boundary-degenerate subspace as the processes they approximate.

The transforms turn a field ``a`` into the delta-method image driving the
copula-process limits:

* ``delta_transform``:        a(u)   - sum_p dC_p(u) a(u^(p))
* ``delta_transform_plus``:   a(s,u) - s a(1,u)
* ``delta_transform_sharp``:  a(s,u) - s sum_p dC_p(u) a(1, u^(p))

with u^(p) the point whose coordinates are all 1 except the p-th, and the
partial derivatives taken as 0 on u_p in {0, 1}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, RandomStream
from .models import CopulaModel

__all__ = [
    "NumericalError",
    "CovarianceSpec",
    "GaussianFieldSample",
    "GaussianFieldSampler",
    "sample_gaussian_field",
    "delta_transform",
    "delta_transform_plus",
    "delta_transform_sharp",
]

# eigenvalues of a valid grid covariance may only be this negative through
# floating-point noise; anything below signals a covariance/grid bug
_EIG_TOL = -1e-10


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance kind plus the model copula it is built from."""

    kind: str
    copula: CopulaModel

    def __post_init__(self):
        if self.kind not in ("iid_copula", "kiefer_mueller"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")

    @classmethod
    def iid_copula(cls, copula: CopulaModel) -> "CovarianceSpec":
        return cls("iid_copula", copula)

    @classmethod
    def kiefer_mueller(cls, copula: CopulaModel) -> "CovarianceSpec":
        return cls("kiefer_mueller", copula)

    def matrix(self, grid: Grid) -> np.ndarray:
        """Dense covariance over all grid points, in grid storage order."""
        if self.kind == "kiefer_mueller":
            if not grid.has_time:
                raise ValueError("kiefer_mueller covariance needs a grid with time axis")
        elif grid.has_time:
            raise ValueError("iid_copula covariance is defined on a time-free grid")
        if grid.dims != self.copula.d:
            raise ValueError("grid dimension does not match the copula")
        pts = grid.points()
        if self.kind == "kiefer_mueller":
            s, u = pts[:, 0], pts[:, 1:]
        else:
            s, u = None, pts
        c_vals = np.asarray(self.copula.cdf(u))
        npts = u.shape[0]
        cov = np.empty((npts, npts))
        block = max(1, int(2e6) // max(1, npts))  # cap the (block, npts, d) scratch
        for lo in range(0, npts, block):
            hi = min(npts, lo + block)
            mins = np.minimum(u[lo:hi, None, :], u[None, :, :])
            cmin = np.asarray(self.copula.cdf(mins.reshape(-1, u.shape[1])))
            cov[lo:hi] = cmin.reshape(hi - lo, npts) - np.outer(c_vals[lo:hi], c_vals)
        cov = 0.5 * (cov + cov.T)
        if s is not None:
            cov *= np.minimum(s[:, None], s[None, :])
        return cov


@dataclass(frozen=True)
class GaussianFieldSample:
    """One draw of a centered Gaussian field, with its provenance."""

    field: Field
    spec: CovarianceSpec
    stream: RandomStream


class GaussianFieldSampler:
    """Factorizes the grid covariance once and then draws cheaply.

    Safe to share read-only across workers; every draw takes its own stream.
    """

    def __init__(self, spec: CovarianceSpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        cov = spec.matrix(grid)
        self.zero_mask = np.diag(cov) == 0.0
        eigvals, eigvecs = np.linalg.eigh(cov)
        if eigvals.min() < _EIG_TOL:
            raise NumericalError(
                f"covariance matrix has eigenvalue {eigvals.min():.3e} below tolerance"
            )
        eigvals = np.clip(eigvals, 0.0, None)
        self.factor = eigvecs * np.sqrt(eigvals)
        self.factor[self.zero_mask, :] = 0.0

    def draw_values(self, count: int, rng: RandomStream) -> np.ndarray:
        """``count`` independent field draws as a (count, npoints) array."""
        z = rng.generator().standard_normal((self.factor.shape[1], count))
        vals = (self.factor @ z).T
        vals[:, self.zero_mask] = 0.0
        return vals

    def draw(self, rng: RandomStream) -> GaussianFieldSample:
        vals = self.draw_values(1, rng)[0]
        return GaussianFieldSample(Field(self.grid, vals), self.spec, rng)


def sample_gaussian_field(spec: CovarianceSpec, grid: Grid,
                          rng: RandomStream) -> GaussianFieldSample:
    """One draw of the centered Gaussian field with the given covariance.

    For repeated draws on the same grid build a :class:`GaussianFieldSampler`
    once instead.
    """
    return GaussianFieldSampler(spec, grid).draw(rng)


def _as_field(b) -> Field:
    return b.field if isinstance(b, GaussianFieldSample) else b


def _marginal_slice(arr: np.ndarray, p: int, d: int, offset: int) -> np.ndarray:
    # values along axis p with every other data axis pinned at its last
    # entry (coordinate 1); `offset` skips a leading time axis
    idx: list = [-1] * (offset + d)
    for t in range(offset):
        idx[t] = slice(None)
    idx[offset + p] = slice(None)
    sub = arr[tuple(idx)]
    shape = [1] * (offset + d)
    for t in range(offset):
        shape[t] = arr.shape[t]
    shape[offset + p] = arr.shape[offset + p]
    return sub.reshape(shape)


def delta_transform(b, c: CopulaModel) -> Field:
    """Field map a(u) - sum_p dC_p(u) a(u^(p)) on a time-free grid."""
    f = _as_field(b)
    grid = f.grid
    if grid.has_time:
        raise ValueError("delta_transform expects a grid without time axis")
    if grid.dims != c.d:
        raise ValueError("grid dimension does not match the copula")
    arr = f.reshaped()
    pts = grid.points()
    out = arr.copy()
    for p in range(grid.dims):
        dp = np.asarray(c.partial_derivative(p, pts)).reshape(grid.shape)
        out = out - dp * _marginal_slice(arr, p, grid.dims, offset=0)
    return Field(grid, out.ravel())


def delta_transform_plus(b) -> Field:
    """Field map a(s, u) - s a(1, u); needs no copula model."""
    f = _as_field(b)
    grid = f.grid
    if not grid.has_time:
        raise ValueError("delta_transform_plus expects a grid with time axis")
    arr = f.reshaped()
    s = grid.time_axis.reshape((-1,) + (1,) * grid.dims)
    out = arr - s * arr[-1][None, ...]
    return Field(grid, out.ravel())


def delta_transform_sharp(b, c: CopulaModel) -> Field:
    """Field map a(s, u) - s sum_p dC_p(u) a(1, u^(p))."""
    f = _as_field(b)
    grid = f.grid
    if not grid.has_time:
        raise ValueError("delta_transform_sharp expects a grid with time axis")
    if grid.dims != c.d:
        raise ValueError("grid dimension does not match the copula")
    arr = f.reshaped()
    last = arr[-1]
    cube_pts = grid.data_points()[: last.size]
    s = grid.time_axis.reshape((-1,) + (1,) * grid.dims)
    out = arr.copy()
    for p in range(grid.dims):
        dp = np.asarray(c.partial_derivative(p, cube_pts)).reshape(grid.shape[1:])
        out = out - s * (dp * _marginal_slice(last, p, grid.dims, offset=0))[None, ...]
    return Field(grid, out.ravel())
