"""Command-line entry point: ``inveff {simulate,estimate,mc,validate}``.

Exit codes: 0 success, 1 a checked condition failed (summability refusal,
error-model validation), 2 bad usage or configuration.  Data goes to ``--out``
or stdout; diagnostics go to stderr.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .estimators import (
    DEFAULT_RATE,
    gamma_representer,
    one_step_path,
    optimal_variance_functional,
    plugin_functional_variance,
    truncation_schedule,
)
from .exceptions import ConfigError, InvEffError, ModelError, ValidationFailure
from .experiment import ExperimentConfig, build_operator, build_target, build_truth, run_monte_carlo
from .noise import get_error_model, validate_error_model
from .operators import DEFAULT_K_MAX
from .simulate import generate_dataset, load_dataset

log = logging.getLogger("inveff")

SCHEMA_VERSION = 1


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out}: {exc.strerror}") from None


def _format(args):
    if args.format:
        return args.format
    if args.out and str(args.out).endswith(".csv"):
        return "csv"
    return "json"


def cmd_simulate(args):
    cfg = _load_json(args.config)
    unknown = set(cfg) - {"schema_version", "operator", "error_model", "truth", "n", "seed", "design_seed"}
    if unknown:
        raise ConfigError(f"unknown simulate config keys: {sorted(unknown)}")
    try:
        op = build_operator(cfg["operator"] if isinstance(cfg["operator"], dict) else {"name": cfg["operator"]})
        em = get_error_model(cfg["error_model"])
        truth = build_truth(cfg["truth"])
        n = int(cfg["n"])
    except KeyError as exc:
        raise ConfigError(f"simulate config missing {exc}") from None
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    ds = generate_dataset(op, truth, em, n, seed, design_seed=cfg.get("design_seed"))
    if _format(args) == "csv":
        _emit(ds.to_csv(), args.out)
    else:
        _emit(json.dumps(ds.to_json(), indent=2) + "\n", args.out)
    return 0


def cmd_estimate(args):
    cfg = _load_json(args.config)
    unknown = set(cfg) - {"schema_version", "operator", "error_model", "target", "m", "r", "K_max"}
    if unknown:
        raise ConfigError(f"unknown estimate config keys: {sorted(unknown)}")
    if args.data is None:
        raise ConfigError("estimate needs --data PATH (dataset CSV or JSON)")
    try:
        op = build_operator(cfg["operator"] if isinstance(cfg["operator"], dict) else {"name": cfg["operator"]})
        em = get_error_model(cfg["error_model"])
        target = cfg["target"]
    except KeyError as exc:
        raise ConfigError(f"estimate config missing {exc}") from None
    try:
        ds = load_dataset(args.data)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.data}: {exc.strerror}") from None
    if "m" in cfg and "r" in cfg:
        raise ConfigError("give either a fixed truncation m or a rate r, not both")
    m = int(cfg["m"]) if "m" in cfg else truncation_schedule(ds.n, cfg.get("r", DEFAULT_RATE))
    phi, k_eval = build_target(target, cfg.get("K_max", DEFAULT_K_MAX))
    rep = gamma_representer(op, phi, k_eval, assume_convergent=bool(target.get("assume_summable", False)))
    if not rep.convergent:
        raise ValidationFailure(
            "refusing to estimate: the summability condition sum_k |<phi, phi_k>| / rho_k < inf "
            f"fails (heuristic {rep.method} test, partial sum {rep.partial_sums[-1]:.4g} at K_max={k_eval})"
        )
    naive, one_step, pilot = one_step_path(ds, op, em, m, k_eval)
    w = phi.padded(k_eval)
    record = {
        "schema_version": SCHEMA_VERSION,
        "n": ds.n,
        "m": m,
        "estimate_naive": float((naive * w).sum()),
        "estimate_one_step": float((one_step * w).sum()),
        "optimal_variance": optimal_variance_functional(op, em, phi, k_eval),
        # evaluated at the pilot series estimate; the true f is unknown
        "plugin_variance": plugin_functional_variance(op, em, pilot, phi, k_eval),
        "summability": rep.diagnostic(),
    }
    _emit(json.dumps(record, indent=2) + "\n", args.out)
    return 0


def cmd_mc(args):
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    if args.seed is not None:
        cfg.master_seed = args.seed
        cfg.validate()
    res = run_monte_carlo(cfg, workers=args.workers, keep_replicates=args.plot_data is not None)
    log.info("wall time %.2fs", res.wall_time_s)
    fmt = _format(args)
    payload = {"json": res.dumps(), "csv": res.to_csv()}
    _emit(payload[fmt], args.out)
    if args.out is not None:
        other = "csv" if fmt == "json" else "json"
        _emit(payload[other], Path(args.out).with_suffix("." + other))
    if args.plot_data is not None:
        _emit(res.replicates_csv(), args.plot_data)
    if not res.bounds["pass"]:
        log.warning("bound ordering not confirmed within error bars; see 'bounds' in the result")
    return 0


def cmd_validate(args):
    spec = {"name": args.model}
    if args.config:
        spec = _load_json(args.config)
        spec = spec.get("error_model", spec)
    elif args.sigma is not None:
        spec["sigma"] = args.sigma
    em = get_error_model(spec)
    report = validate_error_model(em, args.tol)
    _emit(report.dumps() + "\n", args.out)
    for c in report.checks:
        if not c.passed:
            log.error("check %s failed: measured %r, expected %r", c.name, c.measured, c.expected)
    return 0 if report.passed else 1


def _default_workers():
    raw = os.environ.get("INVEFF_WORKERS")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="inveff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw a synthetic dataset")
    s.add_argument("--seed", type=int)

    e = sub.add_parser("estimate", parents=[common], help="naive and one-step estimates from a dataset")
    e.add_argument("--data", metavar="PATH")

    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo variance study")
    mc.add_argument("--workers", type=int, default=_default_workers())
    mc.add_argument("--seed", type=int)
    mc.add_argument("--plot-data", metavar="PATH", help="write per-replicate estimates as CSV")

    v = sub.add_parser("validate", parents=[common], help="check an error model's identities by quadrature")
    v.add_argument("--model", default="logistic", choices=("gaussian", "logistic"))
    v.add_argument("--sigma", type=float)
    v.add_argument("--tol", type=float, default=1e-6)
    return p


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "mc": cmd_mc, "validate": cmd_validate}


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command in ("simulate", "estimate", "mc") and not args.config:
        parser.print_usage(sys.stderr)
        print(f"inveff {args.command}: --config is required", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ValidationFailure as exc:
        print(f"inveff: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ModelError) as exc:
        print(f"inveff: {exc}", file=sys.stderr)
        return 2
    except InvEffError as exc:
        print(f"inveff: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
