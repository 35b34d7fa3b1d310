"""Command-line entry point.

Subcommands: sample, ustat, limits, verify (moment study), clt,
independence, conditional, rates. Every subcommand reads a JSON config
(--config), writes artifacts under --out, and exits 0 on success, 2 on a
config error, 3 on a numeric or precision failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import limits as lim
from .densities import DensityModel, generator_from_config, tail_params, threshold_rule
from .errors import (BudgetExceededError, ClassificationError, ConfigError,
                     DegenerateError, EfficiencyError, HalfspaceUstatsError,
                     InvalidInputError, NumericError)
from .geometry import initial_transformation, make_body, outer_halfspace
from .harness import execute, mecke_edge_mean_quadrature, parse_config
from .sampling import PointCloud, sample_conditional, sample_poisson, sample_tail
from .ustats import compute_S, kernel_from_config

CONFIG_EXIT = 2
NUMERIC_EXIT = 3


def _load_config(path):
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}")


def _model_from(cfg):
    body_spec = cfg.get("body")
    gen_spec = cfg.get("generator")
    if body_spec is None or gen_spec is None:
        raise ConfigError("config needs 'body' and 'generator'")
    body = make_body(body_spec["tag"], d=int(body_spec.get("d", 2)))
    return DensityModel.build(body, generator_from_config(gen_spec))


def _cmd_sample(cfg, out_dir, seed):
    model = _model_from(cfg)
    n = float(cfg.get("n", 0))
    if n <= 0:
        raise ConfigError("n: need a positive intensity")
    seed = int(cfg.get("seed", 0)) if seed is None else seed
    mode = cfg.get("mode", "poisson")
    if mode == "poisson":
        cloud = sample_poisson(model, n, seed)
    elif mode == "tail":
        cloud = sample_tail(model, n, float(cfg.get("t", 1.0)), seed)
    elif mode == "conditional":
        angle = np.asarray(cfg.get("angle", [0.0] * (model.body.d - 1) + [1.0]),
                           float)
        hs = outer_halfspace(model.body, angle, float(cfg.get("t", 1.0)))
        cloud = sample_conditional(model, n, hs, seed)
    else:
        raise ConfigError(f"mode: unknown {mode!r} (poisson | tail | conditional)")
    os.makedirs(out_dir, exist_ok=True)
    path = cloud.save(os.path.join(out_dir, "points"))
    print(f"wrote {path} ({len(cloud)} points)")
    return 0


def _cmd_ustat(cfg, out_dir, seed):
    kernel = kernel_from_config(cfg.get("kernel", {}))
    r = float(cfg.get("r", 1.0))
    if "points" in cfg:
        cloud = PointCloud.load(cfg["points"])
    else:
        raise ConfigError("points: path prefix of a saved cloud is required")
    stat = compute_S(cloud, kernel, r)
    os.makedirs(out_dir, exist_ok=True)
    out = {"value": stat.value, "tuples_examined": stat.tuples_examined,
           "r": stat.r, "kernel": cfg.get("kernel"), "n_points": len(cloud)}
    with open(os.path.join(out_dir, "ustat.json"), "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
    print(f"S_k = {stat.value:g} over {stat.tuples_examined} candidate tuples")
    return 0


def _cmd_limits(cfg, out_dir, seed):
    from .densities import classify_regime
    model = _model_from(cfg)
    kernel = kernel_from_config(cfg.get("kernel", {}))
    angle = np.asarray(cfg.get("angle", [0.0] * (model.body.d - 1) + [1.0]), float)
    frame = initial_transformation(model.body, angle)
    n_grid = np.asarray(cfg.get("n_grid", [2**10, 2**12, 2**14]), float)
    t_of_n = threshold_rule(cfg.get("thresholds", {"kind": "log", "c": 1.0}))
    t_seq = np.array([float(t_of_n(n)) for n in n_grid])
    r = float(cfg.get("r", 1.0))
    tail = tail_params(model, t_seq, np.full_like(t_seq, r))
    regime = cfg.get("regime")
    chi = cfg.get("chi")
    if regime is None:
        regime, chi = classify_regime(model, n_grid, t_seq,
                                      np.full_like(t_seq, r), tail.tail_class)
    os.makedirs(out_dir, exist_ok=True)
    cache = os.path.join(out_dir, "constants-cache")
    samples = int(cfg.get("mc_samples", lim.DEFAULT_SAMPLES))
    key = {"cfg": cfg, "regime": regime}
    exp_lc = lim.cached_constant(
        cache, "expectation", key,
        lambda: lim.expectation_limit(model, kernel.k, frame, kernel, tail, r,
                                      samples=samples))
    comps = lim.variance_components(model, kernel.k, frame, kernel, tail, r,
                                    regime, samples=samples)
    var_lc = lim.variance_limit(tail.tail_class, kernel.k, regime, comps, chi)
    records = [exp_lc.record(), var_lc.record()] + \
        [c.record() for c in comps.values()]
    with open(os.path.join(out_dir, "limits.json"), "w") as fh:
        json.dump({"tail_class": tail.tail_class, "regime": regime, "chi": chi,
                   "records": records}, fh, indent=2, sort_keys=True)
    for rec in records:
        print(f"{rec['kind']}: {rec['value']:.6g} +- {rec['se']:.2g}")
    return 0


def _cmd_study(study):
    def run(cfg, out_dir, seed, threads=None):
        cfg = dict(cfg)
        cfg["study"] = study
        parse_config(cfg)  # fail fast with field-path errors
        execute(cfg, out_dir, seed=seed, threads=threads)
        print(f"artifacts written to {out_dir}")
        return 0
    return run


def _cmd_mecke(cfg, out_dir, seed):
    model = _model_from(cfg)
    angle = np.asarray(cfg.get("angle", [0.0, 1.0]), float)
    hs = outer_halfspace(model.body, angle, float(cfg.get("t", 4.0)))
    value = mecke_edge_mean_quadrature(model, hs, float(cfg.get("r", 1.0)),
                                       float(cfg.get("n", 1e4)))
    print(f"quadrature first moment: {value:.6g}")
    return 0


def build_parser():
    # flags are accepted both before and after the subcommand; SUPPRESS
    # keeps an unset subcommand-level flag from clobbering the global one
    shared = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    shared.add_argument("--config", help="path to the JSON config")
    shared.add_argument("--seed", type=int, help="override the config seed")
    shared.add_argument("--out", help="artifact directory (default: out)")
    shared.add_argument("--threads", type=int,
                        help="parallel replicate workers")
    parser = argparse.ArgumentParser(
        prog="halfspace-ustats", parents=[shared],
        description="Monte Carlo verification of local U-statistics on "
                    "diverging halfspaces")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sample", "ustat", "limits", "verify", "clt", "independence",
                 "conditional", "rates", "mecke"):
        sub.add_parser(name, parents=[shared])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config = getattr(args, "config", None)
    seed = getattr(args, "seed", None)
    out = getattr(args, "out", "out")
    threads = getattr(args, "threads", None)
    handlers = {
        "sample": _cmd_sample,
        "ustat": _cmd_ustat,
        "limits": _cmd_limits,
        "mecke": _cmd_mecke,
        "verify": _cmd_study("moments"),
        "clt": _cmd_study("clt"),
        "independence": _cmd_study("independence"),
        "conditional": _cmd_study("conditional"),
        "rates": _cmd_study("rates"),
    }
    try:
        cfg = _load_config(config)
        handler = handlers[args.command]
        if args.command in ("verify", "clt", "independence", "conditional",
                            "rates"):
            return handler(cfg, out, seed, threads)
        return handler(cfg, out, seed)
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_EXIT
    except (NumericError, DegenerateError, ClassificationError,
            EfficiencyError, BudgetExceededError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except HalfspaceUstatsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
