"""Command-line interface.

Subcommands: train, simulate, verify-bound, sweep-a, export-surface,
validate.  Exit codes: 0 success, 1 verification failure, 2 configuration
error, 3 numeric failure.
"""

import argparse
import json
import os
import sys

from . import bench, pipeline
from .config import load_config
from .errors import (
    BoundUndefinedError,
    ConfigError,
    MinimumEscapedError,
    NoCasimirError,
    NumericDomainError,
    QuadratureError,
    StructuralError,
    TrainingDivergedError,
    UnsupportedStructureError,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (
    NumericDomainError,
    TrainingDivergedError,
    QuadratureError,
    MinimumEscapedError,
    BoundUndefinedError,
    NoCasimirError,
    UnsupportedStructureError,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="casimirctl",
        description=(
            "Neural energy-Casimir controller synthesis for port-Hamiltonian "
            "systems: train, simulate, and certify equilibrium assignment."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default=None, help="artifact output directory")
    common.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="tabular output format"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a controller and verify the bound")
    p.add_argument("config")
    p.add_argument("--no-verify", action="store_true", help="skip the bound check")

    p = sub.add_parser("simulate", parents=[common], help="simulate a trained model")
    p.add_argument("config")
    p.add_argument("--model", required=True, help="trained model bundle (JSON)")

    p = sub.add_parser("verify-bound", parents=[common], help="re-check the assignment bound")
    p.add_argument("report", help="train report JSON")
    p.add_argument("model", help="trained model bundle (JSON)")

    p = sub.add_parser("sweep-a", parents=[common], help="retrain over a margin sweep")
    p.add_argument("config")
    p.add_argument("--values", default=None, help="comma-separated margin values")

    p = sub.add_parser("export-surface", parents=[common], help="export the Lyapunov surface")
    p.add_argument("model", help="trained model bundle (JSON)")
    p.add_argument("--grid", default="101x101", help="surface resolution WxH")

    p = sub.add_parser("validate", parents=[common], help="validate a config and its system")
    p.add_argument("config")
    return parser


def _load(path, seed=None, out_dir=None):
    cfg = load_config(path)
    if seed is not None:
        cfg.seed = int(seed)
    if out_dir is not None:
        cfg.out_dir = out_dir
    return cfg


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _parse_grid(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"--grid must look like 101x101, got '{text}'") from exc


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated numbers, got '{text}'") from exc


def _cmd_train(args):
    cfg = _load(args.config, args.seed, args.out_dir)
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    report, parts, problem = pipeline.run_training(cfg)
    report.to_json(os.path.join(out_dir, "train_report.json"))
    report.history_csv(os.path.join(out_dir, "loss_history.csv"))
    bench.save_bundle(os.path.join(out_dir, "model.json"), cfg, parts, report)
    result = {
        "epsilon": report.epsilon,
        "margin_a": report.margin_a,
        "xi_star": report.xi_star,
        "z_star": report.z_star,
        "bound": report.bound,
        "epochs_run": report.epochs_run,
        "out_dir": out_dir,
    }
    if args.no_verify:
        _emit(result)
        return EXIT_OK
    z_bar, bc = pipeline.bound_check(report, parts["lyapunov"])
    result["z_bar"] = [float(v) for v in z_bar]
    result["bound_check"] = {
        "passed": bool(bc.passed),
        "distance": bc.distance,
        "bound": bc.bound,
        "slack": bc.slack,
    }
    _emit(result)
    return EXIT_OK if bc.passed else EXIT_VERIFICATION


def _cmd_simulate(args):
    cfg = _load(args.config, args.seed, args.out_dir)
    out = pipeline.simulate_from_model(
        args.model, cfg, out_dir=cfg.out_dir or ".", fmt=args.format, seed=args.seed
    )
    _emit(out)
    if out["stabilized"] is False:
        return EXIT_VERIFICATION
    return EXIT_OK


def _cmd_verify_bound(args):
    out = pipeline.verify_bound_from_files(args.report, args.model)
    _emit(out)
    return EXIT_OK if out["passed"] else EXIT_VERIFICATION


def _cmd_sweep(args):
    cfg = _load(args.config, args.seed, args.out_dir)
    values = _parse_values(args.values) if args.values else None
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    ext = "csv" if args.format == "csv" else "json"
    path = os.path.join(out_dir, f"sweep_a.{ext}")
    rows = pipeline.sweep_margin(cfg, values=values, seed=args.seed)
    pipeline.write_sweep(rows, path, fmt=args.format)
    _emit({"rows": rows, "file": path})
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VERIFICATION


def _cmd_surface(args):
    grid = _parse_grid(args.grid)
    parts = bench.load_bundle(args.model)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    ext = "csv" if args.format == "csv" else "json"
    path = os.path.join(out_dir, f"surface.{ext}")
    out = pipeline.export_surface(parts, path, grid=grid, fmt=args.format)
    _emit(out)
    return EXIT_OK


def _cmd_validate(args):
    cfg = _load(args.config, args.seed, args.out_dir)
    rep = pipeline.validate_config_system(cfg, seed=args.seed)
    _emit(
        {
            "config_valid": True,
            "structure_valid": rep.passed,
            "max_skewness": rep.max_skewness,
            "min_damping_eigenvalue": rep.min_damping_eigenvalue,
            "min_input_singular_value": rep.min_input_singular_value,
            "findings": rep.findings,
        }
    )
    return EXIT_OK if rep.passed else EXIT_VERIFICATION


_COMMANDS = {
    "train": _cmd_train,
    "simulate": _cmd_simulate,
    "verify-bound": _cmd_verify_bound,
    "sweep-a": _cmd_sweep,
    "export-surface": _cmd_surface,
    "validate": _cmd_validate,
}


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config exit code
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StructuralError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
