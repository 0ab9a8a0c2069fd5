"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or inference
error. Every run prints the resolved seed and writes a manifest JSON.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .distributions import NoiseParams
from .errors import (CapabilityError, DataError, DomainError, InfeasibleError,
                     InferenceError, ParameterError)
from .estimation import OptimOptions, estimate
from .harness import ExperimentConfig, run_experiment, _write_manifest
from .losses import make_loss
from .mechanism import (drdp_release, load_dataset_csv, load_support_json,
                        privacy_report, read_bundle, write_bundle, _timestamp)
from .rng import GENERATOR_NAME, RngStream
from .tradeoff import (DEFAULT_ALPHA_GRID, PrivacyBudget, TradeoffCurve,
                       beta_c_delta, calibrate, empirical_tradeoff,
                       tradeoff_shrink)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    p = _Parser(prog="zildp", description=__doc__)
    p.add_argument("--version", action="version", version=f"zildp {__version__}")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("calibrate", help="solve the privacy budget for (c', lambda)")
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--delta-dp", type=float, required=True)
    c.add_argument("--zero-mass", type=float, required=True)
    c.add_argument("--support", required=True)
    c.add_argument("--mode", choices=["adp", "dp"], default="adp")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None, help="manifest path (default: stdout only)")

    r = sub.add_parser("release", help="run the doubly-random release on a CSV")
    r.add_argument("--input", required=True)
    r.add_argument("--support", required=True)
    r.add_argument("--zero-mass", type=float, required=True)
    r.add_argument("--lambda", dest="lam", type=float, required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out-prefix", required=True)

    t = sub.add_parser("tradeoff", help="emit trade-off curves as CSV")
    t.add_argument("--c", type=float, required=True)
    t.add_argument("--zero-mass", type=float, default=None)
    t.add_argument("--empirical-d", type=int, default=None,
                   help="also compute the Monte-Carlo curve for this dimension")
    t.add_argument("--n-sim", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="fit an estimator on released data")
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--bundle", help="prefix of a persisted release bundle")
    g.add_argument("--data", help="clean CSV (oracle/naive on original data)")
    e.add_argument("--support", default=None, help="required with --data")
    e.add_argument("--loss", required=True)
    e.add_argument("--method", required=True,
                   choices=["oracle", "naive", "sl", "drcl", "sdrcl"])
    e.add_argument("--tau", type=float, default=None,
                   help="overrides tau for check/quantile losses")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--lenient", action="store_true",
                   help="allow the zero-Laplacian SL comparator on nonsmooth losses")
    e.add_argument("--out", required=True)

    x = sub.add_parser("experiment", help="run a desk-scale experiment grid")
    x.add_argument("--name", required=True,
                   choices=["table1", "table2", "table3", "figure1"])
    x.add_argument("--config", default=None, help="JSON config; overrides flags")
    x.add_argument("--reps", type=int, default=0)
    x.add_argument("--seed", type=int, default=20240613)
    x.add_argument("--out", default="results")
    return p


def _cmd_calibrate(args) -> int:
    support = load_support_json(args.support)
    budget = PrivacyBudget(args.epsilon, args.delta_dp)
    c_prime, lam = calibrate(budget, args.zero_mass, support, args.mode)
    print(f"seed: {args.seed}")
    print(f"c_prime: {c_prime:.6f}")
    print(f"lambda: {lam:.6f}")
    payload = {
        "command": "calibrate",
        "epsilon": args.epsilon,
        "delta_dp": args.delta_dp,
        "zero_mass": args.zero_mass,
        "mode": args.mode,
        "c_prime": c_prime,
        "lambda": lam,
        "seed": args.seed,
        "generator": GENERATOR_NAME,
        "created_at": _timestamp(),
    }
    out = args.out or "calibrate.manifest.json"
    with open(out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_release(args) -> int:
    support = load_support_json(args.support)
    data = load_dataset_csv(args.input, support)
    params = NoiseParams(args.zero_mass, args.lam)
    bundle = drdp_release(data, params, RngStream(args.seed))
    meta = write_bundle(bundle, args.out_prefix)
    report = privacy_report(support, params)
    with open(f"{args.out_prefix}.privacy.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"seed: {args.seed}")
    print(f"wrote {args.out_prefix}.x1.csv, .x2.csv, .meta.json, .privacy.json")
    print(f"c_attribute: {meta['c_attribute']:.6f}  c_individual: {meta['c_individual']:.6f}")
    return 0


def _cmd_tradeoff(args) -> int:
    alphas = DEFAULT_ALPHA_GRID
    if args.empirical_d is not None:
        curve = empirical_tradeoff(args.empirical_d, args.c, args.n_sim,
                                   RngStream(args.seed))
        if args.zero_mass is not None:
            curve = tradeoff_shrink(curve, args.zero_mass)
    else:
        if args.zero_mass is not None:
            betas = beta_c_delta(alphas, args.c, args.zero_mass)
            label = f"beta-c{args.c:g}-zm{args.zero_mass:g}"
        else:
            from .tradeoff import beta_c

            betas = beta_c(alphas, args.c)
            label = f"beta-c{args.c:g}"
        curve = TradeoffCurve(alphas, betas, label)
    curve.to_csv(args.out)
    manifest = {
        "command": "tradeoff", "c": args.c, "zero_mass": args.zero_mass,
        "empirical_d": args.empirical_d, "n_sim": args.n_sim,
        "seed": args.seed, "generator": GENERATOR_NAME,
        "created_at": _timestamp(),
    }
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"seed: {args.seed}")
    print(f"wrote {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    loss_name = args.loss
    if args.tau is not None:
        base = loss_name.split(":")[0]
        loss_name = f"{base}:{args.tau}"
    loss = make_loss(loss_name)
    opts = OptimOptions(seed=args.seed)
    if args.bundle:
        bundle = read_bundle(args.bundle)
        mask = bundle.support.private_mask
        x1 = bundle.x1[:, mask]
        x2 = bundle.x2[:, mask]
        pub = bundle.x1[:, ~mask] if np.any(~mask) else None
        if args.method == "oracle":
            raise ParameterError("the oracle method needs --data (original values)")
        report = estimate(args.method, loss, x1=x1, x2=x2, publics=pub,
                          zero_mass=bundle.params.zero_mass,
                          scale=bundle.params.scale, options=opts,
                          strict=not args.lenient)
    else:
        if not args.support:
            raise ParameterError("--data requires --support")
        support = load_support_json(args.support)
        data = load_dataset_csv(args.data, support)
        mask = support.private_mask
        xm = data.values[:, mask]
        pub = data.values[:, ~mask] if np.any(~mask) else None
        if args.method != "oracle":
            raise ParameterError(
                f"method {args.method!r} needs a release bundle, not clean data")
        report = estimate("oracle", loss, x=xm, publics=pub, options=opts)
    report.to_json(args.out)
    manifest = {
        "command": "estimate", "loss": loss_name, "method": args.method,
        "seed": args.seed, "source": args.bundle or args.data,
        "generator": GENERATOR_NAME, "created_at": _timestamp(),
    }
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"seed: {args.seed}")
    print(f"theta_hat: {np.asarray(report.theta_hat).tolist()}")
    print(f"wrote {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig(experiment=args.name, seed=args.seed,
                                  outdir=args.out,
                                  replications=args.reps)
    print(f"seed: {config.seed}")
    result = run_experiment(config)
    outdir = os.path.join(config.outdir, config.experiment)
    print(f"wrote {outdir}")
    if hasattr(result, "frame"):
        print(result.frame.to_string(index=False, max_rows=40))
    return 0


_HANDLERS = {
    "calibrate": _cmd_calibrate,
    "release": _cmd_release,
    "tradeoff": _cmd_tradeoff,
    "estimate": _cmd_estimate,
    "experiment": _cmd_experiment,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.command:
        parser.print_help()
        return 1
    try:
        return _HANDLERS[args.command](args)
    except (_UsageError, ParameterError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, InfeasibleError, InferenceError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
