"""Command-line interface.

Subcommands: ``simulate``, ``estimate``, ``test-symmetry``, ``test-constancy``
and ``mc``.  Every run is driven entirely by ``--seed`` (default 0) and emits
a JSON report embedding the resolved configuration and seed, so reports are
byte-identical across reruns and worker counts; wall-clock timing goes to
stderr only.  Exit codes: 0 success, 1 statistical input problems (ties under
the error policy, malformed CSV), 2 configuration/usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .core import Grid, RandomStream, dump_report, make_uniform_grid
from .empirical import CsvFormatError, DataMatrix, TieError
from .inference import (
    ConfigError,
    constancy_test,
    mc_experiment,
    scheme_from_spec,
    spearman_ci,
    symmetry_test,
)
from .models import (
    ClaytonCopula,
    ComonotoneCopula,
    GaussianCopula,
    GumbelCopula,
    IidGenerator,
    IndependenceCopula,
    KhoudrajiCopula,
    RegimeGenerator,
    Var1Generator,
)

_FAMILIES = ("independence", "comonotone", "gaussian", "clayton", "gumbel", "khoudraji")


def _copula_from_flags(model, d, theta, r, a, base):
    if model == "independence":
        return IndependenceCopula(d)
    if model == "comonotone":
        return ComonotoneCopula(d)
    if model == "gaussian":
        if r is None:
            raise ConfigError("--r", "gaussian model needs --r")
        return GaussianCopula(r)
    if model == "clayton":
        if theta is None:
            raise ConfigError("--theta", "clayton model needs --theta")
        return ClaytonCopula(theta, d)
    if model == "gumbel":
        if theta is None:
            raise ConfigError("--theta", "gumbel model needs --theta")
        return GumbelCopula(theta, d)
    if model == "khoudraji":
        if a is None:
            raise ConfigError("--a", "khoudraji model needs --a")
        inner = _copula_from_flags(base, 2, theta, r, None, None)
        return KhoudrajiCopula(inner, a)
    raise ConfigError("--model", f"unknown model {model!r}")


def _generator_from_flags(args):
    first = _copula_from_flags(args.model, args.d, args.theta, args.r, args.a, args.base)
    if args.serial == "iid":
        return IidGenerator(first)
    if args.serial == "var1":
        if args.r is None:
            raise ConfigError("--r", "var1 needs the innovation correlation --r")
        return Var1Generator(a=args.ar_coef, innovation_corr=args.r)
    second = _copula_from_flags(args.model2, args.d, args.theta2, args.r2, args.a2,
                                args.base2)
    return RegimeGenerator(first, second, args.break_frac)


def _scheme_spec_from_flags(args) -> dict:
    spec = {"scheme": args.bootstrap}
    if args.bootstrap == "block":
        spec["block_len"] = args.block_len
    return spec


def _emit(report: dict, out_path: str | None) -> None:
    text = dump_report(report)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> dict:
    generator = _generator_from_flags(args)
    rng = RandomStream(args.seed)
    data = generator.sample(args.n, rng)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"x{p + 1}" for p in range(data.d)) + "\n")
        for row in data.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return {
        "command": "simulate",
        "config": {"generator": generator.spec(), "n": args.n, "out": args.out},
        "seed": args.seed,
        "results": {"rows": data.n, "columns": data.d},
    }


def _cmd_estimate(args) -> dict:
    data = DataMatrix.from_csv(args.infile)
    scheme = scheme_from_spec(_scheme_spec_from_flags(args), "--bootstrap")
    rng = RandomStream(args.seed)
    report = spearman_ci(data, scheme, args.B, args.confidence, rng,
                         tie_policy=args.tie_policy)
    return {
        "command": "estimate",
        "config": {
            "in": args.infile, "stat": "rho", "B": args.B,
            "confidence": args.confidence, "tie_policy": args.tie_policy,
            **report.method,
        },
        "seed": args.seed,
        "results": report.to_json(),
    }


def _cmd_test_symmetry(args) -> dict:
    data = DataMatrix.from_csv(args.infile)
    scheme = scheme_from_spec(_scheme_spec_from_flags(args), "--bootstrap")
    rng = RandomStream(args.seed)
    grid = make_uniform_grid(2, args.grid)
    report = symmetry_test(data, scheme, args.B, args.alpha, grid, rng,
                           replicate_style=args.replicate_style,
                           tie_policy=args.tie_policy)
    return {
        "command": "test-symmetry",
        "config": {"in": args.infile, "B": args.B, "alpha": args.alpha,
                   "grid": args.grid, "tie_policy": args.tie_policy, **report.method},
        "seed": args.seed,
        "results": report.to_json(),
    }


def _cmd_test_constancy(args) -> dict:
    data = DataMatrix.from_csv(args.infile)
    scheme = scheme_from_spec(_scheme_spec_from_flags(args), "--bootstrap")
    rng = RandomStream(args.seed)
    time_m = args.time_grid if args.time_grid is not None else args.grid
    grid = Grid(
        axes=tuple(np.linspace(0.0, 1.0, args.grid) for _ in range(data.d)),
        time_axis=np.linspace(0.0, 1.0, time_m),
    )
    report = constancy_test(data, scheme, args.B, args.alpha, grid, rng,
                            tie_policy=args.tie_policy)
    return {
        "command": "test-constancy",
        "config": {"in": args.infile, "B": args.B, "alpha": args.alpha,
                   "grid": args.grid, "time_grid": time_m,
                   "tie_policy": args.tie_policy, **report.method},
        "seed": args.seed,
        "results": report.to_json(),
    }


def _cmd_mc(args) -> dict:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(args.config, f"invalid JSON: {exc}") from exc
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed", "expected an integer")
    report = mc_experiment(config, RandomStream(seed))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("sample,value\n")
            for name in sorted(report["results"]["samples"]):
                for v in report["results"]["samples"][name]:
                    fh.write(f"{name},{v!r}\n")
    return {"command": "mc", "config": report["config"], "seed": seed,
            "results": report["results"]}


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=_FAMILIES, default="independence")
    p.add_argument("--d", type=int, default=2, help="dimension (default 2)")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--base", choices=_FAMILIES[:-1], default="clayton",
                   help="base family for the khoudraji model")
    p.add_argument("--serial", choices=("iid", "var1", "regime"), default="iid")
    p.add_argument("--ar-coef", type=float, default=0.5,
                   help="autoregression coefficient for --serial var1")
    p.add_argument("--break-frac", type=float, default=0.5,
                   help="change-point fraction for --serial regime")
    p.add_argument("--model2", choices=_FAMILIES, default="independence",
                   help="post-break copula for --serial regime")
    p.add_argument("--theta2", type=float, default=None)
    p.add_argument("--r2", type=float, default=None)
    p.add_argument("--a2", type=float, default=None)
    p.add_argument("--base2", choices=_FAMILIES[:-1], default="clayton")


def _add_bootstrap_flags(p: argparse.ArgumentParser, default: str) -> None:
    p.add_argument("--bootstrap", choices=("multiplier", "multinomial", "block"),
                   default=default)
    p.add_argument("--block-len", type=int, default=None,
                   help="block length (default: floor(n^(1/3)))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copulaproc",
        description="Empirical copula processes: simulation, estimation, testing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a dataset and write it as CSV")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="Spearman's rho with a bootstrap interval")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--stat", choices=("rho",), default="rho")
    _add_bootstrap_flags(p, default="multinomial")
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--confidence", type=float, default=0.9)
    p.add_argument("--tie-policy", choices=("error", "average-rank"), default="error")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("test-symmetry", help="test C(u,v) = C(v,u)")
    p.add_argument("--in", dest="infile", required=True)
    _add_bootstrap_flags(p, default="multinomial")
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--grid", type=int, default=21, help="points per grid axis")
    p.add_argument("--replicate-style", choices=("swap", "centered", "uncentered"),
                   default="swap",
                   help="calibration: row-swap randomization (default), centered "
                        "bootstrap differences, or the uncentered diagnostic form")
    p.add_argument("--tie-policy", choices=("error", "average-rank"), default="error")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_test_symmetry)

    p = sub.add_parser("test-constancy", help="test for constant dependence over time")
    p.add_argument("--in", dest="infile", required=True)
    _add_bootstrap_flags(p, default="block")
    p.add_argument("--B", type=int, default=300)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--grid", type=int, default=21, help="points per data axis")
    p.add_argument("--time-grid", type=int, default=None,
                   help="points on the time axis (default: same as --grid)")
    p.add_argument("--tie-policy", choices=("error", "average-rank"), default="error")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_test_constancy)

    p = sub.add_parser("mc", help="Monte Carlo distribution comparison from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="overrides the seed in the config file")
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None, help="also dump raw replicate values as CSV")
    p.set_defaults(func=_cmd_mc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        report = args.func(args)
    except (TieError, CsvFormatError, FileNotFoundError) as exc:
        print(f"copulaproc: input error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"copulaproc: config error: {exc}", file=sys.stderr)
        return 2
    _emit(report, getattr(args, "out", None) if args.command != "simulate" else None)
    print(f"elapsed: {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
