"""Parametric copula models and serially dependent data generators.

Every model exposes an exact cdf, analytic partial derivatives with the
boundary convention that the p-th partial is 0 whenever u_p lies in {0, 1},
and an exact sampler driven by a :class:`~copulaproc.core.RandomStream`.

The serial generators produce :class:`~copulaproc.empirical.DataMatrix`
objects whose stationary copula is known in closed form, so simulation
output can be compared against ground truth.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr, ndtri

from .core import RandomStream
from .empirical import DataMatrix

__all__ = [
    "CopulaModel",
    "IndependenceCopula",
    "ComonotoneCopula",
    "GaussianCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "KhoudrajiCopula",
    "DerivativeUnsupportedError",
    "IidGenerator",
    "Var1Generator",
    "RegimeGenerator",
]


class DerivativeUnsupportedError(NotImplementedError):
    """The model's cdf is not differentiable where required (e.g. the
    comonotone copula along its diagonal)."""


def _check_cube(u, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 1
    if scalar:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[-1] != d:
        raise ValueError(f"points must have {d} coordinates")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("points must lie in the unit cube")
    return arr, scalar


class CopulaModel:
    """Base class: a d-variate copula with cdf, partial derivatives and sampler."""

    d: int

    def cdf(self, u) -> np.ndarray | float:
        """C(u) for one point (1-d input) or a batch of points (2-d input)."""
        pts, scalar = _check_cube(u, self.d)
        out = np.zeros(pts.shape[0])
        pos = ~(pts <= 0.0).any(axis=1)
        if np.any(pos):
            out[pos] = self._cdf_positive(pts[pos])
        return float(out[0]) if scalar else out

    def _cdf_positive(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def partial_derivative(self, p: int, u) -> np.ndarray | float:
        """d C / d u_p, defined as 0 whenever u_p is 0 or 1.

        ``p`` is a 0-based coordinate index.
        """
        if not 0 <= p < self.d:
            raise ValueError(f"coordinate index {p} out of range for d={self.d}")
        pts, scalar = _check_cube(u, self.d)
        out = np.zeros(pts.shape[0])
        interior = (pts[:, p] > 0.0) & (pts[:, p] < 1.0) & ~(pts <= 0.0).any(axis=1)
        if np.any(interior):
            out[interior] = self._pd_interior(p, pts[interior])
        return float(out[0]) if scalar else out

    def _pd_interior(self, p: int, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, rng: RandomStream) -> DataMatrix:
        """n i.i.d. rows with uniform margins and this copula."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return DataMatrix(self._draw(n, rng))

    def _draw(self, n: int, rng: RandomStream) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        """JSON-serializable description (used in run reports)."""
        raise NotImplementedError


class IndependenceCopula(CopulaModel):
    """Product copula, C(u) = prod_p u_p."""

    def __init__(self, d: int = 2):
        if d < 2:
            raise ValueError("d must be >= 2")
        self.d = int(d)

    def _cdf_positive(self, u):
        return np.prod(u, axis=1)

    def _pd_interior(self, p, u):
        keep = [q for q in range(self.d) if q != p]
        return np.prod(u[:, keep], axis=1)

    def _draw(self, n, rng):
        return rng.generator().random((n, self.d))

    def spec(self):
        return {"family": "independence", "d": self.d}


class ComonotoneCopula(CopulaModel):
    """Upper Frechet bound, C(u) = min_p u_p.

    Partial derivatives do not extend continuously across the diagonal, so
    :meth:`partial_derivative` is unsupported.
    """

    def __init__(self, d: int = 2):
        if d < 2:
            raise ValueError("d must be >= 2")
        self.d = int(d)

    def _cdf_positive(self, u):
        return np.min(u, axis=1)

    def partial_derivative(self, p, u):
        raise DerivativeUnsupportedError(
            "comonotone copula has no continuous partial derivatives"
        )

    def _draw(self, n, rng):
        v = rng.generator().random(n)
        return np.tile(v[:, None], (1, self.d))

    def spec(self):
        return {"family": "comonotone", "d": self.d}


# 96-node Gauss-Legendre rule; the integrand below is analytic on the
# integration segment for |r| < 1, giving ~1e-15 absolute accuracy
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def _bvn_cdf(h: np.ndarray, k: np.ndarray, rho: float) -> np.ndarray:
    """P(Z1 <= h, Z2 <= k) for standard bivariate normal with correlation rho,
    via the single-integral identity
    Phi2(h,k,rho) = Phi(h)Phi(k) + (2 pi)^{-1} int_0^rho
        exp(-(h^2 - 2 h k t + k^2) / (2 (1-t^2))) / sqrt(1-t^2) dt."""
    t = 0.5 * rho * (_GL_NODES + 1.0)
    w = 0.5 * rho * _GL_WEIGHTS
    hh, kk = h[..., None], k[..., None]
    omt2 = 1.0 - t * t
    integrand = np.exp(-(hh * hh - 2.0 * hh * kk * t + kk * kk) / (2.0 * omt2))
    return ndtr(h) * ndtr(k) + (integrand / np.sqrt(omt2) * w).sum(-1) / (2.0 * np.pi)


class GaussianCopula(CopulaModel):
    """Bivariate Gaussian copula with correlation r in (-1, 1)."""

    def __init__(self, r: float):
        if not -1.0 < r < 1.0:
            raise ValueError("correlation must satisfy -1 < r < 1")
        self.r = float(r)
        self.d = 2

    def _cdf_positive(self, u):
        out = np.empty(u.shape[0])
        one = (u >= 1.0).any(axis=1)
        if np.any(one):
            # C(u, 1) = u and C(1, v) = v
            out[one] = np.min(u[one], axis=1)
        rest = ~one
        if np.any(rest):
            h = ndtri(u[rest, 0])
            k = ndtri(u[rest, 1])
            out[rest] = _bvn_cdf(h, k, self.r)
        return out

    def _pd_interior(self, p, u):
        z_p = ndtri(u[:, p])
        other = u[:, 1 - p]
        s = np.sqrt(1.0 - self.r * self.r)
        out = np.ones(u.shape[0])
        inner = other < 1.0
        out[inner] = ndtr((ndtri(other[inner]) - self.r * z_p[inner]) / s)
        return out

    def _draw(self, n, rng):
        z = rng.generator().standard_normal((n, 2))
        x1 = z[:, 0]
        x2 = self.r * z[:, 0] + np.sqrt(1.0 - self.r * self.r) * z[:, 1]
        return np.column_stack([ndtr(x1), ndtr(x2)])

    def spec(self):
        return {"family": "gaussian", "r": self.r}


class ClaytonCopula(CopulaModel):
    """Clayton copula, C(u) = (sum_p u_p^{-theta} - d + 1)^{-1/theta}, theta > 0."""

    def __init__(self, theta: float, d: int = 2):
        if theta <= 0:
            raise ValueError("theta must be positive")
        if d < 2:
            raise ValueError("d must be >= 2")
        self.theta = float(theta)
        self.d = int(d)

    def _core(self, u):
        return np.sum(u ** (-self.theta), axis=1) - self.d + 1.0

    def _cdf_positive(self, u):
        return self._core(u) ** (-1.0 / self.theta)

    def _pd_interior(self, p, u):
        return u[:, p] ** (-self.theta - 1.0) * self._core(u) ** (-1.0 / self.theta - 1.0)

    def _draw(self, n, rng):
        # gamma frailty: psi(t) = (1+t)^{-1/theta} is the Laplace transform
        # of Gamma(1/theta, 1)
        gen = rng.generator()
        w = gen.gamma(1.0 / self.theta, 1.0, size=n)
        e = gen.standard_exponential((n, self.d))
        return (1.0 + e / w[:, None]) ** (-1.0 / self.theta)

    def spec(self):
        return {"family": "clayton", "theta": self.theta, "d": self.d}


class GumbelCopula(CopulaModel):
    """Gumbel copula, C(u) = exp(-(sum_p (-log u_p)^theta)^{1/theta}), theta >= 1."""

    def __init__(self, theta: float, d: int = 2):
        if theta < 1.0:
            raise ValueError("theta must be >= 1")
        if d < 2:
            raise ValueError("d must be >= 2")
        self.theta = float(theta)
        self.d = int(d)

    def _cdf_positive(self, u):
        a = np.sum((-np.log(u)) ** self.theta, axis=1)
        return np.exp(-(a ** (1.0 / self.theta)))

    def _pd_interior(self, p, u):
        th = self.theta
        lp = -np.log(u[:, p])
        a = np.sum((-np.log(u)) ** th, axis=1)
        # u_q = 1 for every q != p collapses to the uniform margin slope 1
        out = np.empty(u.shape[0])
        deg = a <= 0.0
        out[deg] = 1.0
        nz = ~deg
        out[nz] = (
            np.exp(-(a[nz] ** (1.0 / th)))
            * a[nz] ** (1.0 / th - 1.0)
            * lp[nz] ** (th - 1.0)
            / u[nz, p]
        )
        return out

    def _draw(self, n, rng):
        gen = rng.generator()
        if self.theta == 1.0:
            return np.exp(-gen.standard_exponential((n, self.d)))
        # positive-stable frailty of index 1/theta (Chambers-Mallows-Stuck)
        alpha = 1.0 / self.theta
        theta_u = gen.uniform(0.0, np.pi, size=n)
        e0 = gen.standard_exponential(n)
        w = (np.sin(alpha * theta_u) / np.sin(theta_u) ** (1.0 / alpha)) * (
            np.sin((1.0 - alpha) * theta_u) / e0
        ) ** ((1.0 - alpha) / alpha)
        e = gen.standard_exponential((n, self.d))
        return np.exp(-((e / w[:, None]) ** alpha))

    def spec(self):
        return {"family": "gumbel", "theta": self.theta, "d": self.d}


class KhoudrajiCopula(CopulaModel):
    """Asymmetric deformation of a bivariate base copula,
    C(u, v) = u^{1-a} * base(u^a, v) with 0 < a < 1.

    Non-exchangeable for generic bases; used as the alternative in symmetry
    testing.
    """

    def __init__(self, base: CopulaModel, a: float):
        if base.d != 2:
            raise ValueError("base copula must be bivariate")
        if not 0.0 < a < 1.0:
            raise ValueError("a must be in (0, 1)")
        self.base = base
        self.a = float(a)
        self.d = 2

    def _cdf_positive(self, u):
        lifted = np.column_stack([u[:, 0] ** self.a, u[:, 1]])
        return u[:, 0] ** (1.0 - self.a) * np.asarray(self.base.cdf(lifted))

    def _pd_interior(self, p, u):
        a = self.a
        x, v = u[:, 0], u[:, 1]
        lifted = np.column_stack([x**a, v])
        if p == 0:
            k = np.asarray(self.base.cdf(lifted))
            k1 = np.asarray(self.base.partial_derivative(0, lifted))
            return (1.0 - a) * x ** (-a) * k + a * k1
        k2 = np.asarray(self.base.partial_derivative(1, lifted))
        return x ** (1.0 - a) * k2

    def _draw(self, n, rng):
        # max construction: X = max(V^{1/(1-a)}, W1^{1/a}), Y = W2,
        # with (W1, W2) from the base copula and V uniform
        w = self.base.sample(n, rng.child(0)).values
        v = rng.child(1).generator().random(n)
        x = np.maximum(v ** (1.0 / (1.0 - self.a)), w[:, 0] ** (1.0 / self.a))
        return np.column_stack([x, w[:, 1]])

    def spec(self):
        return {"family": "khoudraji", "base": self.base.spec(), "a": self.a}


# ---------------------------------------------------------------------------
# serial generators


class IidGenerator:
    """Independent rows from a fixed copula."""

    def __init__(self, copula: CopulaModel):
        self.copula = copula

    @property
    def stationary_copula(self) -> CopulaModel:
        return self.copula

    def sample(self, n: int, rng: RandomStream) -> DataMatrix:
        return self.copula.sample(n, rng)

    def spec(self):
        return {"kind": "iid", "copula": self.copula.spec()}


class Var1Generator:
    """Bivariate first-order vector autoregression X_t = a X_{t-1} + Z_t with
    standard normal innovations of correlation r shared across components.

    With equal coefficients on both components the stationary law is
    bivariate normal with cross-correlation r, so the stationary copula is
    ``GaussianCopula(r)`` exactly.
    """

    def __init__(self, a: float, innovation_corr: float, burn_in: int = 200):
        if not abs(a) < 1.0:
            raise ValueError("|a| < 1 required for stationarity")
        if burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not -1.0 < innovation_corr < 1.0:
            raise ValueError("innovation correlation must lie in (-1, 1)")
        self.a = float(a)
        self.r = float(innovation_corr)
        self.burn_in = int(burn_in)

    @property
    def stationary_copula(self) -> CopulaModel:
        return GaussianCopula(self.r)

    def sample(self, n: int, rng: RandomStream) -> DataMatrix:
        if n < 1:
            raise ValueError("n must be >= 1")
        gen = rng.generator()
        z = gen.standard_normal((self.burn_in + n, 2))
        innov = np.column_stack(
            [z[:, 0], self.r * z[:, 0] + np.sqrt(1.0 - self.r * self.r) * z[:, 1]]
        )
        x = lfilter([1.0], [1.0, -self.a], innov, axis=0)
        return DataMatrix(x[self.burn_in:])

    def spec(self):
        return {"kind": "var1", "a": self.a, "r": self.r, "burn_in": self.burn_in}


class RegimeGenerator:
    """i.i.d. rows whose copula switches from ``first`` to ``second`` after
    the fraction ``break_fraction`` of the sample (dependence change-point)."""

    def __init__(self, first: CopulaModel, second: CopulaModel, break_fraction: float):
        if not 0.0 < break_fraction < 1.0:
            raise ValueError("break_fraction must be in (0, 1)")
        if first.d != second.d:
            raise ValueError("both copulas must share the same dimension")
        self.first = first
        self.second = second
        self.break_fraction = float(break_fraction)

    @property
    def stationary_copula(self):
        return None  # not constant over time

    def sample(self, n: int, rng: RandomStream) -> DataMatrix:
        if n < 1:
            raise ValueError("n must be >= 1")
        n1 = int(np.floor(self.break_fraction * n + 1e-9))
        parts = []
        if n1 > 0:
            parts.append(self.first.sample(n1, rng.child(0)).values)
        if n - n1 > 0:
            parts.append(self.second.sample(n - n1, rng.child(1)).values)
        return DataMatrix(np.vstack(parts))

    def spec(self):
        return {
            "kind": "regime",
            "first": self.first.spec(),
            "second": self.second.spec(),
            "break_fraction": self.break_fraction,
        }
