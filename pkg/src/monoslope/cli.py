"""Command line interface: ``monoslope <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .asymptotics import gof_test, limit_constants
from .chernoff import cached_constants, default_cache_dir
from .estimator import Direction, monotone_estimate, monotone_estimate_csd
from .models import FAMILIES, Dataset, ModelSpec, build_lambda_n, sample
from .stepfn import StepFunction

log = logging.getLogger("monoslope")

EXIT_CHECK_FAILED = 2


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    if args.config:
        return json.loads(Path(args.config).read_text())
    return {}


def _model_spec(args, cfg: dict) -> ModelSpec:
    if getattr(args, "model", None):
        d = json.loads(Path(args.model).read_text())
    elif "model" in cfg and cfg["model"]:
        d = cfg["model"]
    else:
        d = ex.default_model(args.family or cfg.get("family", "density"))
    if args.family:
        d = {**d, "family": args.family}
    return ModelSpec.from_dict(d)


def _chernoff_kwargs(args) -> dict:
    return {"reps": args.reps, "T": args.T, "h": args.h, "a_max": args.a_max, "a_step": args.a_step}


def _report(checks, check: bool) -> int:
    failed = 0
    for label, ok in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {label}")
        failed += not ok
    return EXIT_CHECK_FAILED if (check and failed) else 0


# -- commands -------------------------------------------------------------------


def cmd_estimate(args, cfg) -> int:
    lam_n = StepFunction.from_csv(args.input)
    build = monotone_estimate if args.variant == "hat" else monotone_estimate_csd
    est = build(lam_n, Direction(args.direction))
    out = _out_dir(args)
    est.to_csv(out / "estimate.csv")
    est.to_json(out / "estimate.json")
    print(out / "estimate.csv")
    return 0


def cmd_simulate(args, cfg) -> int:
    spec = _model_spec(args, cfg)
    data = sample(spec, args.n, np.random.default_rng(args.seed))
    out = _out_dir(args)
    data.to_csv(out / f"{spec.family}_data.csv")
    build_lambda_n(spec, data).to_csv(out / f"{spec.family}_lambda_n.csv")
    print(out / f"{spec.family}_data.csv")
    return 0


def cmd_chernoff(args, cfg) -> int:
    est = cached_constants(args.p, seed=args.seed, cache_dir=args.cache_dir, threads=args.threads, **_chernoff_kwargs(args))
    out = _out_dir(args)
    est.to_json(out / f"chernoff_p{args.p}.json")
    est.curve_csv(out / f"chernoff_p{args.p}_cov.csv")
    print(json.dumps({k: v for k, v in est.to_dict().items() if k not in ("a_grid", "cov", "cov_se")}, indent=2))
    return 0


def _cached(args, p):
    return cached_constants(p, seed=args.chernoff_seed, cache_dir=args.cache_dir, compute=False, **_chernoff_kwargs(args))


def cmd_constants(args, cfg) -> int:
    spec = _model_spec(args, cfg)
    consts = limit_constants(spec, args.p, _cached(args, args.p))
    print(consts.to_json(_out_dir(args) / f"constants_{spec.family}_p{args.p}.json"))
    return 0


def cmd_gof(args, cfg) -> int:
    spec0 = ModelSpec.from_dict(json.loads(Path(args.null_spec).read_text()))
    if args.family and args.family != spec0.family:
        raise SystemExit("--family does not match the null specification")
    data = Dataset.from_csv(spec0.family, args.data, n=args.n_processes)
    res = gof_test(data, spec0, args.p, _cached(args, args.p))
    text = json.dumps(res.to_dict(), indent=2)
    (_out_dir(args) / "gof.json").write_text(text)
    print(text)
    return 0


def _experiment_config(args, cfg) -> ex.ExperimentConfig:
    d = dict(cfg)
    for key in ("family", "replicates", "variant"):
        if getattr(args, key, None) is not None:
            d[key] = getattr(args, key)
    if args.p is not None:
        d["p"] = args.p
    if args.n_grid is not None:
        d["n_grid"] = args.n_grid
    if args.seed is not None:
        d["seed"] = args.seed
    d["threads"] = args.threads
    if d.get("model") and args.family and d["model"].get("family") != args.family:
        d.pop("model")
    return ex.ExperimentConfig.from_dict(d)


def _run_experiment(args, cfg, name) -> int:
    config = _experiment_config(args, cfg)
    if name == "risk":
        res, checks = ex.run_risk(config), ex.check_risk
    elif name == "boundary":
        res, checks = ex.run_boundary(config), ex.check_boundary
    elif name == "modulus":
        res, checks = ex.modulus_diagnostic(config), ex.check_modulus
    else:
        chern = {p: _cached(args, p) for p in config.p}
        res, checks = ex.run_clt(config, chern), ex.check_clt
    rows_path, summary_path = res.save(_out_dir(args))
    log.info("wrote %s and %s", rows_path, summary_path)
    return _report(checks(res.summary), args.check)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--check", action="store_true", help="exit with status 2 when a criterion fails")
    common.add_argument("-v", "--verbose", action="store_true")

    chern = argparse.ArgumentParser(add_help=False)
    chern.add_argument("--reps", type=int, default=200_000)
    chern.add_argument("--T", type=float, default=6.0)
    chern.add_argument("--h", type=float, default=2e-3)
    chern.add_argument("--a-max", dest="a_max", type=float, default=4.0)
    chern.add_argument("--a-step", dest="a_step", type=float, default=0.1)
    chern.add_argument("--cache-dir", default=None, help=f"Chernoff cache (default {default_cache_dir()})")
    chern.add_argument("--chernoff-seed", type=int, default=0, help="seed of the cached Chernoff estimate")

    parser = argparse.ArgumentParser(prog="monoslope", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="monotone estimate from a Lambda_n CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--direction", choices=[d.value for d in Direction], default="nonincreasing")
    p.add_argument("--variant", choices=("hat", "tilde"), default="hat")

    p = sub.add_parser("simulate", parents=[common], help="simulate a dataset and its Lambda_n")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--model", help="model JSON (default: built-in model of the family)")

    p = sub.add_parser("chernoff", parents=[common, chern], help="estimate E|X(0)|^p and k_p")
    p.add_argument("--p", type=float, required=True)

    p = sub.add_parser("constants", parents=[common, chern], help="limit constants m_p and sigma_p^2")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--model")
    p.add_argument("--p", type=float, required=True)

    p = sub.add_parser("gof", parents=[common, chern], help="goodness-of-fit test of a simple null")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--null-spec", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n-processes", type=int, default=None, help="number of processes (poisson data)")

    for name in ("clt", "risk", "boundary", "modulus"):
        parents = [common, chern] if name == "clt" else [common]
        p = sub.add_parser(name, parents=parents, help=f"{name} experiment")
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--p", type=float, nargs="+")
        p.add_argument("--n-grid", type=int, nargs="+")
        p.add_argument("--replicates", type=int)
        p.add_argument("--variant", choices=("hat", "tilde"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = _load_config(args)
    if args.seed is None and args.command in ("simulate", "chernoff"):
        args.seed = int(cfg.get("seed", 0))
    handlers = {
        "estimate": cmd_estimate,
        "simulate": cmd_simulate,
        "chernoff": cmd_chernoff,
        "constants": cmd_constants,
        "gof": cmd_gof,
    }
    try:
        if args.command in handlers:
            return handlers[args.command](args, cfg)
        return _run_experiment(args, cfg, args.command)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
