"""Rank-based inference procedures built on the copula process machinery.

* multivariate Spearman's rho with reverse-percentile bootstrap intervals,
* a test for copula exchangeability C(u,v) = C(v,u),
* a test for constant dependence over time (change-point alternative),
* Monte Carlo experiment harnesses comparing finite-sample, bootstrap and
  limit-field distributions of sup-norm statistics.

Test calibration convention: with B bootstrap replicates T_1, ..., T_B of a
statistic T, the p-value is (1 + #{b : T_b >= T}) / (B + 1), and the reported
critical value is the order statistic that makes "T > critical value",
"p-value < alpha" and the reject decision exactly equivalent (ties resolve
toward retaining the hypothesis).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Grid, RandomStream, make_uniform_grid, parallel_map, sup_norm
from .empirical import (
    DataMatrix,
    PseudoSample,
    _column_sort_state,
    copula_process,
    empirical_copula,
    pseudo_observations,
)
from .limitfield import CovarianceSpec, GaussianFieldSampler
from .models import (
    ClaytonCopula,
    ComonotoneCopula,
    CopulaModel,
    GaussianCopula,
    GumbelCopula,
    IidGenerator,
    IndependenceCopula,
    KhoudrajiCopula,
    RegimeGenerator,
    Var1Generator,
)
from .resample import WeightedCopulaEvaluator, WeightScheme, default_block_len, draw_weights

__all__ = [
    "ConfigError",
    "TestReport",
    "IntervalReport",
    "spearman_rho",
    "spearman_ci",
    "symmetry_test",
    "constancy_test",
    "ks_distance",
    "mc_experiment",
    "spearman_coverage_experiment",
    "rejection_rate_experiment",
    "copula_from_spec",
    "generator_from_spec",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` points at the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest collection target

    statistic: float
    critical_value: float
    p_value: float
    B: int
    alpha: float
    decision: str
    method: dict

    def __post_init__(self):
        if self.decision not in ("reject", "retain"):
            raise ValueError("decision must be 'reject' or 'retain'")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")
        reject = self.p_value < self.alpha
        if reject != (self.decision == "reject") or reject != (
            self.statistic > self.critical_value
        ):
            raise ValueError("inconsistent statistic / critical value / p-value triple")

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "B": self.B,
            "alpha": self.alpha,
            "decision": self.decision,
            "method": self.method,
        }


@dataclass(frozen=True)
class IntervalReport:
    estimate: float
    lower: float
    upper: float
    confidence: float
    method: dict

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "confidence": self.confidence,
            "method": self.method,
        }


def _pseudo(x, tie_policy: str) -> PseudoSample:
    return x if isinstance(x, PseudoSample) else pseudo_observations(x, tie_policy)


def _rho_scale(d: int) -> float:
    return (d + 1) / (2**d - (d + 1))


def spearman_rho(x: DataMatrix | PseudoSample, tie_policy: str = "error") -> float:
    """Multivariate Spearman's rho of the rank pseudo-observations.

    Uses the exact closed form of the copula integral,
    int C_n(u) du = n^{-1} sum_i prod_p (1 - Uhat_ip), so no grid is involved.
    """
    u = _pseudo(x, tie_policy)
    if u.d < 2:
        raise ValueError("Spearman's rho needs d >= 2")
    if u.n < 2:
        raise ValueError("Spearman's rho needs n >= 2")
    integral = float(np.mean(np.prod(1.0 - u.u_hat, axis=1)))
    return _rho_scale(u.d) * (2**u.d * integral - 1.0)


def _resolve_scheme(scheme: WeightScheme, n: int) -> WeightScheme:
    if scheme.kind == "block" and scheme.block_len is None:
        return replace(scheme, block_len=default_block_len(n))
    return scheme


class _SpearmanBootstrap:
    """Bootstrap replicates of Spearman's rho via weighted pseudo-observations."""

    def __init__(self, x: DataMatrix):
        self.n, self.d = x.n, x.d
        self.orders, self.positions = _column_sort_state(x)

    def rho(self, weights: np.ndarray | None) -> float:
        n, d = self.n, self.d
        if weights is None:
            weights_total = float(n)
            prod = np.ones(n)
            for p in range(d):
                prod *= 1.0 - self.positions[p] / n
            integral = prod.mean()
        else:
            prod = np.ones(n)
            for p in range(d):
                cum = np.cumsum(weights[self.orders[p]])
                prod *= 1.0 - cum[self.positions[p] - 1] / cum[-1]
            integral = float(np.sum(weights * prod)) / float(weights.sum())
        return _rho_scale(d) * (2**d * integral - 1.0)


def spearman_ci(x: DataMatrix, scheme: WeightScheme, B: int, confidence: float,
                rng: RandomStream, tie_policy: str = "error") -> IntervalReport:
    """Reverse-percentile bootstrap interval for Spearman's rho.

    The interval is [rho_n - q_{1-a/2}/sqrt(n), rho_n - q_{a/2}/sqrt(n)] with
    q the empirical quantiles of the bootstrap sample of
    sqrt(n) (rho_{n,b} - rho_n).
    """
    if B < 100:
        raise ValueError("B must be >= 100")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    pseudo_observations(x, tie_policy)  # surfaces ties per policy before resampling
    scheme = _resolve_scheme(scheme, x.n)
    boot = _SpearmanBootstrap(x)
    rho_n = boot.rho(None)
    root_n = math.sqrt(x.n)
    reps = np.empty(B)
    for b in range(B):
        w = draw_weights(scheme, x.n, rng.child(b))
        reps[b] = root_n * (boot.rho(w.m) - rho_n)
    a = 1.0 - confidence
    q_lo, q_hi = np.quantile(reps, [a / 2.0, 1.0 - a / 2.0])
    return IntervalReport(
        estimate=rho_n,
        lower=rho_n - float(q_hi) / root_n,
        upper=rho_n - float(q_lo) / root_n,
        confidence=confidence,
        method={"statistic": "spearman_rho", "B": B, "n": x.n, "d": x.d,
                **scheme.spec()},
    )


def _bootstrap_pvalue(reps: np.ndarray, statistic: float, B: int) -> float:
    return (1.0 + float(np.sum(reps >= statistic))) / (B + 1.0)


def _bootstrap_critical_value(reps: np.ndarray, alpha: float) -> float:
    """Threshold c with 'statistic > c' equivalent to 'p-value < alpha'."""
    B = reps.size
    max_exceed = int(math.floor(alpha * (B + 1) - 1.0 - 1e-9))
    if max_exceed < 0:
        return math.inf
    if max_exceed >= B:
        return -math.inf
    return float(np.sort(reps)[B - max_exceed - 1])


def _build_report(statistic: float, reps: np.ndarray, B: int, alpha: float,
                  method: dict) -> TestReport:
    p = _bootstrap_pvalue(reps, statistic, B)
    crit = _bootstrap_critical_value(reps, alpha)
    return TestReport(
        statistic=float(statistic),
        critical_value=crit,
        p_value=p,
        B=B,
        alpha=alpha,
        decision="reject" if p < alpha else "retain",
        method=method,
    )


def _flip_pattern(gen: np.random.Generator, n: int, block_len: int | None) -> np.ndarray:
    """Coordinate-swap mask; blockwise-constant when a block length is given,
    so serial dependence survives the randomization."""
    if block_len is None or block_len <= 1:
        return gen.random(n) < 0.5
    k = math.ceil(n / block_len)
    return np.repeat(gen.random(k) < 0.5, block_len)[:n]


def symmetry_test(x: DataMatrix, scheme: WeightScheme, B: int, alpha: float,
                  grid: Grid, rng: RandomStream, replicate_style: str = "swap",
                  tie_policy: str = "error") -> TestReport:
    """Exchangeability test for a bivariate copula.

    Statistic: T_n = sup over the grid of |sqrt(n) (C_n(u,v) - C_n(v,u))|.

    ``replicate_style`` selects the calibration:

    * ``'swap'`` (default): each replicate applies a random coordinate
      swap to the rows of the pseudo-observations (one swap decision per
      length-l block for the block scheme, so serial structure survives;
      per row otherwise), re-ranks, and recomputes the statistic.  Row
      swaps leave the null law invariant, so the replicate law tracks the
      null law of T_n itself, finite-sample rank granularity included.
      Re-ranking the mixed rank lattice leaves a conservative
      mid-distribution distortion that decays roughly like n^{-1/2}; the
      rejection rate at conventional levels is accurate from n of a few
      hundred on.
    * ``'centered'``: sup |(C_{n,b}(u,v) - C_{n,b}(v,u)) - (C_n(u,v) -
      C_n(v,u))| scaled by sqrt(n) over scheme-weighted bootstrap copulas,
      the continuous-mapping image of the bootstrapped copula process;
      asymptotically valid under either hypothesis but markedly
      conservative at moderate n, because the re-ranked bootstrap
      over-disperses the process.
    * ``'uncentered'``: drops the observed difference (diagnostic only; not
      valid under the alternative).
    """
    if x.d != 2:
        raise ValueError("symmetry test is defined for bivariate data")
    if B < 1:
        raise ValueError("B must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if replicate_style not in ("swap", "centered", "uncentered"):
        raise ValueError(f"unknown replicate_style {replicate_style!r}")
    if grid.has_time or grid.dims != 2 or not np.array_equal(grid.axes[0], grid.axes[1]):
        raise ValueError("symmetry test needs a square, swap-closed grid without time axis")
    base = pseudo_observations(x, tie_policy)
    scheme = _resolve_scheme(scheme, x.n)
    ev = WeightedCopulaEvaluator(x, grid)
    root_n = math.sqrt(x.n)
    cn = ev.copula_values(None)
    d_obs = cn - cn.T
    statistic = root_n * float(np.max(np.abs(d_obs)))
    reps = np.empty(B)
    for b in range(B):
        rep_stream = rng.child(b)
        if replicate_style == "swap":
            flip = _flip_pattern(rep_stream.generator(), x.n,
                                 scheme.block_len if scheme.kind == "block" else None)
            swapped = base.u_hat.copy()
            swapped[flip] = swapped[flip][:, ::-1]
            # swapping mixes the two rank columns, so re-rank (ties across
            # the mixed columns take average ranks)
            ps = pseudo_observations(DataMatrix(swapped), "average-rank")
            cb = empirical_copula(ps, grid).reshaped()
            diff = cb - cb.T
        else:
            w = draw_weights(scheme, x.n, rep_stream)
            cb = ev.copula_values(w.m)
            diff = cb - cb.T
            if replicate_style == "centered":
                diff = diff - d_obs
        reps[b] = root_n * float(np.max(np.abs(diff)))
    method = {"test": "symmetry", "n": x.n, "grid_m": len(grid.axes[0]),
              "replicate_style": replicate_style, **scheme.spec()}
    return _build_report(statistic, reps, B, alpha, method)


def constancy_test(x: DataMatrix, scheme: WeightScheme, B: int, alpha: float,
                   grid: Grid, rng: RandomStream,
                   tie_policy: str = "error") -> TestReport:
    """Test for a constant copula over time.

    Statistic: sup over (s, u) of the self-centered sequential process
    |C+_n(s,u)| = |(1/sqrt(n)) sum_{i<=floor(sn)} (1{Uhat_i <= u} - C_n(u))|.

    Calibration: replicates are bootstrap-weighted partial sums of the
    centered indicators with the same proportional self-centering map,

        R_b(s,u) = A_b(s,u) - (floor(sn)/n) A_b(1,u),
        A_b(s,u) = (1/sqrt(n)) sum_{i<=floor(sn)} (M_i - 1)(1{Uhat_i <= u} - C_n(u)),

    with the weights attached to the original time positions, so block
    weights preserve the serial structure.  Centering both factors makes
    A_b vanish on the boundary exactly as the sequential process does
    (uncentered weighted sums would leak pure weight noise into the time
    marginal and grossly inflate the replicates); the transform needs no
    smoothness of the copula, matching the limit of the statistic.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if not grid.has_time:
        raise ValueError("constancy test needs a grid with time axis")
    pseudo_observations(x, tie_policy)
    scheme = _resolve_scheme(scheme, x.n)
    ev = WeightedCopulaEvaluator(x, grid)
    n = x.n
    root_n = math.sqrt(n)
    frac = (ev.prefix / n).reshape((-1,) + (1,) * x.d)
    n_obs = ev.prefix_counts(None)
    cn = n_obs[-1] / n
    plus_obs = n_obs - frac * n_obs[-1][None, ...]
    statistic = float(np.max(np.abs(plus_obs))) / root_n
    reps = np.empty(B)
    for b in range(B):
        w = draw_weights(scheme, n, rng.child(b))
        centered = w.m - 1.0
        n_w = ev.prefix_counts_fixed_ranks(centered)
        w_sums = ev.prefix_weight_sums(centered).reshape((-1,) + (1,) * x.d)
        a_b = n_w - cn[None, ...] * w_sums
        r_b = a_b - frac * a_b[-1][None, ...]
        reps[b] = float(np.max(np.abs(r_b))) / root_n
    method = {"test": "constancy", "n": n, "grid_m": len(grid.axes[0]),
              "time_m": len(grid.time_axis), **scheme.spec()}
    return _build_report(statistic, reps, B, alpha, method)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov sup distance between empirical cdfs."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


# ---------------------------------------------------------------------------
# model/generator construction from JSON-style specs


def copula_from_spec(spec, path: str = "copula") -> CopulaModel:
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    family = spec.get("family")
    try:
        if family == "independence":
            return IndependenceCopula(int(spec.get("d", 2)))
        if family == "comonotone":
            return ComonotoneCopula(int(spec.get("d", 2)))
        if family == "gaussian":
            if "r" not in spec:
                raise ConfigError(f"{path}.r", "missing correlation")
            return GaussianCopula(float(spec["r"]))
        if family == "clayton":
            if "theta" not in spec:
                raise ConfigError(f"{path}.theta", "missing parameter")
            return ClaytonCopula(float(spec["theta"]), int(spec.get("d", 2)))
        if family == "gumbel":
            if "theta" not in spec:
                raise ConfigError(f"{path}.theta", "missing parameter")
            return GumbelCopula(float(spec["theta"]), int(spec.get("d", 2)))
        if family == "khoudraji":
            if "base" not in spec:
                raise ConfigError(f"{path}.base", "missing base copula")
            if "a" not in spec:
                raise ConfigError(f"{path}.a", "missing asymmetry parameter")
            base = copula_from_spec(spec["base"], f"{path}.base")
            return KhoudrajiCopula(base, float(spec["a"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.family", f"unknown copula family {family!r}")


def generator_from_spec(spec, path: str = "generator"):
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    kind = spec.get("kind")
    try:
        if kind == "iid":
            return IidGenerator(copula_from_spec(spec.get("copula"), f"{path}.copula"))
        if kind == "var1":
            return Var1Generator(
                a=float(spec.get("a", 0.5)),
                innovation_corr=float(spec.get("r", 0.5)),
                burn_in=int(spec.get("burn_in", 200)),
            )
        if kind == "regime":
            return RegimeGenerator(
                first=copula_from_spec(spec.get("first"), f"{path}.first"),
                second=copula_from_spec(spec.get("second"), f"{path}.second"),
                break_fraction=float(spec.get("break_fraction", 0.5)),
            )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.kind", f"unknown generator kind {kind!r}")


def scheme_from_spec(spec, path: str = "bootstrap") -> WeightScheme:
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    kind = spec.get("scheme")
    try:
        if kind == "multiplier":
            return WeightScheme.multiplier(spec.get("multiplier_dist", "exponential"))
        if kind == "multinomial":
            return WeightScheme.multinomial()
        if kind == "block":
            bl = spec.get("block_len")
            return WeightScheme.block(None if bl is None else int(bl))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.scheme", f"unknown bootstrap scheme {kind!r}")


# ---------------------------------------------------------------------------
# Monte Carlo harnesses (tasks are top-level so the process pool can pickle)


def _sup_process_task(args) -> float:
    generator, copula, n, grid, stream = args
    data = generator.sample(n, stream)
    return sup_norm(copula_process(data, copula, grid))


def _spearman_task(args) -> float:
    generator, n, stream = args
    data = generator.sample(n, stream)
    return spearman_rho(data)


def _limit_sup_sample(copula, grid: Grid, draws: int, rng: RandomStream) -> np.ndarray:
    """sup-norms of ``draws`` transformed limit-field draws, batched over the
    whole sample (one covariance factorization, one matrix of draws)."""
    sampler = GaussianFieldSampler(CovarianceSpec.iid_copula(copula), grid)
    raw = sampler.draw_values(draws, rng)
    pts = grid.points()
    shape = grid.shape
    axis_pos = np.indices(shape)
    vals = raw.copy()
    for p in range(copula.d):
        dp = np.asarray(copula.partial_derivative(p, pts))
        # flat positions of the marginal points u^(p) for every grid point
        sel = [np.full(shape, shape[q] - 1) for q in range(copula.d)]
        sel[p] = axis_pos[p]
        marg = np.ravel_multi_index(tuple(sel), shape).ravel()
        vals -= dp[None, :] * raw[:, marg]
    return np.max(np.abs(vals), axis=1)


def _quantile_table(sample: np.ndarray) -> dict:
    qs = [0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99]
    vals = np.quantile(sample, qs)
    return {str(q): float(v) for q, v in zip(qs, vals)}


def _require(cfg: dict, key: str, kind, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    val = cfg[key]
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{path}.{key}" if path else key, "expected an integer")
    elif not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {kind.__name__}")
    return val


_MC_KEYS = {"generator", "n", "statistic", "grid_m", "monte_carlo", "bootstrap",
            "limit", "seed"}


def mc_experiment(config: dict, rng: RandomStream) -> dict:
    """Distribution-comparison experiment.

    Draws a Monte Carlo sample of the configured statistic over fresh
    datasets, optionally a bootstrap sample of its resampled counterpart from
    one dataset and a sample of the limit-field statistic, and reports all
    pairwise two-sample Kolmogorov-Smirnov distances plus quantile tables.
    """
    if not isinstance(config, dict):
        raise ConfigError("", "config must be an object")
    for key in config:
        if key not in _MC_KEYS:
            raise ConfigError(key, "unknown key")
    generator = generator_from_spec(_require(config, "generator", dict, ""), "generator")
    n = _require(config, "n", int, "")
    if n < 2:
        raise ConfigError("n", "need n >= 2")
    statistic = _require(config, "statistic", str, "")
    if statistic not in ("sup_copula_process", "spearman_rho"):
        raise ConfigError("statistic", f"unknown statistic {statistic!r}")
    grid_m = config.get("grid_m", 21)
    if not isinstance(grid_m, int) or grid_m < 2:
        raise ConfigError("grid_m", "expected an integer >= 2")
    mc_cfg = _require(config, "monte_carlo", dict, "")
    reps = _require(mc_cfg, "reps", int, "monte_carlo")
    if reps < 1:
        raise ConfigError("monte_carlo.reps", "need reps >= 1")

    copula = generator.stationary_copula
    d = copula.d if copula is not None else 2
    if statistic == "sup_copula_process" and copula is None:
        raise ConfigError("statistic",
                          "sup_copula_process needs a generator with known copula")
    grid = make_uniform_grid(d, grid_m)

    samples: dict[str, np.ndarray] = {}
    mc_rng = rng.child(0)
    if statistic == "sup_copula_process":
        items = [(generator, copula, n, grid, mc_rng.child(r)) for r in range(reps)]
        samples["monte_carlo"] = np.asarray(parallel_map(_sup_process_task, items))
    else:
        items = [(generator, n, mc_rng.child(r)) for r in range(reps)]
        samples["monte_carlo"] = np.asarray(parallel_map(_spearman_task, items))

    resolved = {
        "generator": generator.spec(),
        "n": n,
        "statistic": statistic,
        "grid_m": grid_m,
        "monte_carlo": {"reps": reps},
        "seed": {"seed": rng.seed, "stream_id": rng.stream_id},
    }

    if "bootstrap" in config:
        if statistic != "sup_copula_process":
            raise ConfigError("bootstrap", "bootstrap comparison needs sup_copula_process")
        boot_cfg = config["bootstrap"]
        scheme = scheme_from_spec(boot_cfg, "bootstrap")
        B = _require(boot_cfg, "B", int, "bootstrap")
        if B < 1:
            raise ConfigError("bootstrap.B", "need B >= 1")
        boot_rng = rng.child(1)
        data = generator.sample(n, boot_rng.child(0))
        scheme = _resolve_scheme(scheme, n)
        ev = WeightedCopulaEvaluator(data, grid)
        cn = ev.copula_values(None)
        root_n = math.sqrt(n)
        vals = np.empty(B)
        rep_rng = boot_rng.child(1)
        for b in range(B):
            w = draw_weights(scheme, n, rep_rng.child(b))
            vals[b] = root_n * float(np.max(np.abs(ev.copula_values(w.m) - cn)))
        samples["bootstrap"] = vals
        resolved["bootstrap"] = {**scheme.spec(), "B": B}

    if "limit" in config:
        if statistic != "sup_copula_process":
            raise ConfigError("limit", "limit comparison needs sup_copula_process")
        lim_cfg = config["limit"]
        draws = _require(lim_cfg, "draws", int, "limit")
        if draws < 1:
            raise ConfigError("limit.draws", "need draws >= 1")
        samples["limit"] = _limit_sup_sample(copula, grid, draws, rng.child(2))
        resolved["limit"] = {"draws": draws}

    results: dict = {
        "samples": {k: v.tolist() for k, v in samples.items()},
        "quantiles": {k: _quantile_table(v) for k, v in samples.items()},
        "ks": {},
    }
    names = sorted(samples)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            results["ks"][f"{a}_vs_{b}"] = ks_distance(samples[a], samples[b])
    return {"config": resolved, "results": results}


def _coverage_task(args):
    generator, scheme, n, B, confidence, run_stream = args
    data = generator.sample(n, run_stream.child(0))
    report = spearman_ci(data, scheme, B, confidence, run_stream.child(1))
    return (report.lower, report.upper)


def spearman_coverage_experiment(generator, scheme: WeightScheme, n: int, runs: int,
                                 B: int, confidence: float, true_rho: float,
                                 rng: RandomStream) -> dict:
    """Empirical CI coverage of a known Spearman's rho over fresh datasets."""
    items = [(generator, scheme, n, B, confidence, rng.child(r)) for r in range(runs)]
    intervals = parallel_map(_coverage_task, items)
    covered = [lo <= true_rho <= hi for lo, hi in intervals]
    return {
        "config": {
            "generator": generator.spec(), **scheme.spec(), "n": n, "runs": runs,
            "B": B, "confidence": confidence, "true_rho": true_rho,
            "seed": {"seed": rng.seed, "stream_id": rng.stream_id},
        },
        "results": {
            "coverage": float(np.mean(covered)),
            "intervals": [[float(lo), float(hi)] for lo, hi in intervals],
        },
    }


def _rejection_task(args):
    kind, generator, scheme, n, B, alpha, grid_m, time_m, run_stream = args
    data = generator.sample(n, run_stream.child(0))
    if kind == "symmetry":
        grid = make_uniform_grid(2, grid_m)
        report = symmetry_test(data, scheme, B, alpha, grid, run_stream.child(1))
    else:
        grid = Grid(
            axes=tuple(np.linspace(0.0, 1.0, grid_m) for _ in range(data.d)),
            time_axis=np.linspace(0.0, 1.0, time_m),
        )
        report = constancy_test(data, scheme, B, alpha, grid, run_stream.child(1))
    return (report.p_value, report.decision == "reject")


def rejection_rate_experiment(kind: str, generator, scheme: WeightScheme, n: int,
                              runs: int, B: int, alpha: float, rng: RandomStream,
                              grid_m: int = 21, time_m: int = 21) -> dict:
    """Rejection rate of the symmetry or constancy test over fresh datasets.

    Under a true null this estimates the level; under an alternative, the
    power.  The per-run p-values are returned for calibration diagnostics.
    """
    if kind not in ("symmetry", "constancy"):
        raise ValueError("kind must be 'symmetry' or 'constancy'")
    items = [
        (kind, generator, scheme, n, B, alpha, grid_m, time_m, rng.child(r))
        for r in range(runs)
    ]
    outcomes = parallel_map(_rejection_task, items)
    p_values = [float(p) for p, _ in outcomes]
    rejections = [bool(r) for _, r in outcomes]
    return {
        "config": {
            "test": kind, "generator": generator.spec(), **scheme.spec(),
            "n": n, "runs": runs, "B": B, "alpha": alpha, "grid_m": grid_m,
            "time_m": time_m,
            "seed": {"seed": rng.seed, "stream_id": rng.stream_id},
        },
        "results": {
            "rejection_rate": float(np.mean(rejections)),
            "p_values": p_values,
        },
    }
