"""Command-line interface.

Subcommands cover the three reproducible experiments (TOML config in,
CSV + SVG out), the correspondence tooling for approximating functions,
the direct/dynamical Dirichlet testers, and the triangular decomposition
of critical lattices.  Exit codes: 0 success, 2 bad input or config,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments, hajos, tester
from .dani import parse_psi, psi_to_r, series_diagnostics
from .errors import ConfigError, DirichletLabError, NumericFailure
from .lattice import LatticeBasis, WeightPair
from .rng import worker_rng


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirichlet-lab",
        description="Measure estimates and Dirichlet-property testers for unimodular lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("measure-scaling", "zero-one", "equidistribution"):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} experiment")
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory for CSV and SVG")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("dani", help="correspondence and series diagnostics for psi")
    p.add_argument("--psi", required=True, help="e.g. c_over_t:c=0.5 | log:c=1,tau=2 | loglog:c=1,tau=1.5")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--emit", choices=("series", "radius"), default="series")
    p.add_argument("--s-max", type=float, default=10.0, help="radius table extent beyond s0")

    p = sub.add_parser("di-test", help="direct and dynamical Dirichlet testers")
    p.add_argument("--A", required=True, help="JSON file with matrix rows, or random:<seed>")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--weights", default="equal", help='"equal" or alpha:beta as comma lists, e.g. 0.6,0.4:1.0')
    p.add_argument("--psi", required=True)
    p.add_argument("--T", type=float, default=None, help="horizon for the direct test")
    p.add_argument("--S", type=float, default=None, help="flow endpoint for the dynamical test")
    p.add_argument("--h", type=float, default=0.02, help="dynamical grid step")

    p = sub.add_parser("hajos", help="triangular decomposition and tiling check")
    p.add_argument("--basis", default=None, help="JSON file with basis rows")
    p.add_argument("--random", default=None, help="d:seed for a random critical lattice")
    p.add_argument("--tol", type=float, default=hajos.DEFAULT_TOL)
    p.add_argument("--r", type=float, default=0.0, help="region radius for the tiling check")
    p.add_argument("--probes", type=int, default=20_000)
    return parser


def _parse_weights(text: str, m: int, n: int) -> WeightPair:
    if text == "equal":
        return WeightPair.equal(m, n)
    try:
        alpha_text, beta_text = text.split(":")
        alpha = tuple(float(x) for x in alpha_text.split(","))
        beta = tuple(float(x) for x in beta_text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse weights {text!r}: {exc}") from exc
    w = WeightPair(alpha, beta)
    if w.m != m or w.n != n:
        raise ConfigError(f"weights {text!r} do not match m={m}, n={n}")
    return w


def _load_target(spec: str, m: int, n: int) -> tester.TargetMatrix:
    if spec.startswith("random:"):
        seed = int(spec.split(":", 1)[1])
        return tester.TargetMatrix.random(m, n, worker_rng(seed, 0))
    with open(spec) as fh:
        rows = json.load(fh)
    A = tester.TargetMatrix(np.asarray(rows, dtype=float))
    if A.m != m or A.n != n:
        raise ConfigError(f"target in {spec!r} is {A.m}x{A.n}, expected {m}x{n}")
    return A


def _cmd_experiment(args) -> int:
    payload = experiments.load_config(args.config)
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.command == "measure-scaling":
        cfg = experiments.MeasureScalingConfig.from_dict(payload)
        res = experiments.run_measure_scaling(cfg, args.out)
        print(f"wrote {res.csv_path} and {res.figure_path}")
        print(f"fitted slope {res.slope:.4f} +- {res.slope_halfwidth:.4f}")
    elif args.command == "zero-one":
        cfg = experiments.ZeroOneConfig.from_dict(payload)
        res = experiments.run_zero_one(cfg, args.out)
        print(f"wrote {res.csv_path} and {res.figure_path}")
        for psi, pts in res.fractions.items():
            trail = ", ".join(f"{t:g}:{f:.3f}" for t, f in pts)
            print(f"{psi}: {trail}")
    else:
        cfg = experiments.EquidistributionConfig.from_dict(payload)
        res = experiments.run_equidistribution(cfg, args.out)
        print(f"wrote {res.csv_path} and {res.figure_path}")
        print(
            f"reference {res.reference_value:.6f}"
            + (f" +- {res.reference_std_error:.6f}" if res.reference_std_error else "")
        )
    return 0


def _cmd_dani(args) -> int:
    psi = parse_psi(args.psi)
    if args.emit == "series":
        report = series_diagnostics(psi, args.m + args.n)
        json.dump(report.to_json_dict(), sys.stdout, indent=2)
        print()
    else:
        r = psi_to_r(psi, args.m, args.n)
        ss = np.linspace(r.s0, r.s0 + args.s_max, 101)
        print("s,r,t")
        for s in ss:
            sv = float(s)
            rv = float(r.value(sv))
            t = float(np.exp(sv - args.n * rv))
            print(f"{sv!r},{rv!r},{t!r}")
    return 0


def _cmd_di_test(args) -> int:
    A = _load_target(args.A, args.m, args.n)
    w = _parse_weights(args.weights, args.m, args.n)
    psi = parse_psi(args.psi)
    if args.T is None and args.S is None:
        raise ConfigError("di-test: provide --T (direct) and/or --S (dynamical)")
    out: dict = {"target": A.entries.tolist()}
    if args.T is not None:
        out["direct"] = tester.direct_test(A, w, psi, args.T).to_json_dict()
    if args.S is not None:
        out["dynamical"] = tester.dynamical_test(A, w, psi, args.S, h=args.h).to_json_dict()
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def _cmd_hajos(args) -> int:
    if (args.basis is None) == (args.random is None):
        raise ConfigError("hajos: provide exactly one of --basis or --random d:seed")
    if args.basis is not None:
        with open(args.basis) as fh:
            L = LatticeBasis.from_rows(json.load(fh))
    else:
        try:
            d_text, seed_text = args.random.split(":")
            d, seed = int(d_text), int(seed_text)
        except ValueError as exc:
            raise ConfigError(f"hajos: cannot parse --random {args.random!r}") from exc
        L, _, _ = hajos.random_critical_basis(d, worker_rng(seed, 0))
    dec = hajos.decompose_critical(L, tol=args.tol)
    tiling = hajos.tiling_check(L, r=args.r, probe_count=args.probes)
    out = {
        "tiling": {
            "region_member": tiling.region_member,
            "shortest_length": tiling.shortest_length,
            "covered_fraction": tiling.covered_fraction,
            "n_probes": tiling.n_probes,
        }
    }
    if dec is None:
        out["decomposition"] = None
    else:
        out["decomposition"] = {
            "permutation": list(dec.permutation),
            "u": dec.u.tolist(),
            "gamma": dec.gamma.tolist(),
            "residual": dec.residual,
        }
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("measure-scaling", "zero-one", "equidistribution"):
            return _cmd_experiment(args)
        if args.command == "dani":
            return _cmd_dani(args)
        if args.command == "di-test":
            return _cmd_di_test(args)
        return _cmd_hajos(args)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DirichletLabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
