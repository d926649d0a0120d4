"""Command-line front end: ``mirroravg run | calibrate | check-concavity``.

Exit codes: 0 success (or a passing check), 1 failing concavity check,
2 invalid configuration, 3 I/O failure.  Errors go to stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import SCENARIO_KINDS, beta_for_scenario, catalog_exp_concavity, check_psi_concavity
from .losses import PHI_LOSSES
from .scenarios import ClassificationScenario, scenario_from_dict
from .study import METHODS, run_study

__all__ = ["TRIAL_COLUMNS", "main", "slopes_csv", "trials_csv"]

TRIAL_COLUMNS = ("scenario", "method", "beta", "M", "n", "rep", "seed", "excess_risk", "clamp_rate", "wall_ms")
SLOPE_COLUMNS = ("method", "slope", "stderr", "cells_used", "error")

CONCAVITY_LOSSES = ("kl", *PHI_LOSSES, "bernoulli-psi", "poisson-psi")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _csv_text(header_comment: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def trials_csv(report, *, timing: bool = False, stamp: str | None = None) -> str:
    """``trials.csv`` text; everything after the first line is deterministic
    unless ``timing`` fills the ``wall_ms`` column."""
    rows = [(t.scenario, t.method, _num(t.beta), t.M, t.n, t.rep, t.seed, _num(t.excess_risk),
             _num(t.clamp_rate), _num(t.wall_ms) if timing else "") for t in report.trials]
    return _csv_text(f"mirroravg {__version__} generated {stamp or _stamp()}", TRIAL_COLUMNS, rows)


def slopes_csv(report, *, stamp: str | None = None) -> str:
    rows = []
    for m in report.methods:
        s = report.slopes.get(m, {})
        used = sum(1 for c in report.cells if c["method"] == m and c["mean_excess"] > 0)
        rows.append((m, _num(s.get("slope")), _num(s.get("stderr")), used, s.get("error", "")))
    return _csv_text(f"mirroravg {__version__} generated {stamp or _stamp()}", SLOPE_COLUMNS, rows)


def _write_atomic(files: dict[Path, str | bytes]) -> None:
    """Write every file to a temp sibling first, then rename them all into place."""
    staged = []
    try:
        for path, content in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            staged.append((tmp, path))
            mode = "wb" if isinstance(content, bytes) else "w"
            with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
                fh.write(content)
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


# --------------------------------------------------------------------------
# run


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def _prepare_run(cfg: dict, args) -> dict:
    scen_spec = dict(_require(cfg, "scenario"))
    if args.paper_beta:
        scen_spec["paper_beta"] = True
    try:
        template = scenario_from_dict(scen_spec)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"scenario: {exc}") from None
    if args.paper_beta and isinstance(template, ClassificationScenario):
        template = replace(template, paper_beta=True)

    n_grid = _require(cfg, "n_grid")
    if not isinstance(n_grid, list) or not n_grid or not all(isinstance(n, int) and n >= 1 for n in n_grid):
        raise ConfigError("n_grid must be a non-empty list of positive integers")
    methods = cfg.get("methods", list(METHODS))
    if not isinstance(methods, list) or not methods or any(m not in METHODS for m in methods):
        raise ConfigError(f"methods must be a non-empty subset of {list(METHODS)}")
    reps = cfg.get("reps", 30)
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError("reps must be a positive integer")
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer")
    mc_budget = cfg.get("mc_budget")
    if mc_budget is not None and (not isinstance(mc_budget, int) or mc_budget < 2):
        raise ConfigError("mc_budget must be an integer >= 2")
    remainder_budget = cfg.get("remainder_budget", 200_000)
    if not isinstance(remainder_budget, int) or remainder_budget < 2:
        raise ConfigError("remainder_budget must be an integer >= 2")
    if "clamp_floor" in cfg:
        if "floor" in scen_spec:
            raise ConfigError("give the clamp floor once, either as clamp_floor or scenario.floor")
        scen_spec["floor"] = float(cfg["clamp_floor"])
        template = scenario_from_dict(scen_spec)

    beta = cfg.get("beta")
    warnings = []
    if beta is not None:
        if not isinstance(beta, (int, float)) or not math.isfinite(beta) or beta <= 0:
            raise ConfigError("beta must be a positive number")
        for n in n_grid:
            bmin = template.with_n(n).policy.beta_min
            if beta < bmin:
                msg = f"beta {beta!r} is below the calibrated minimum {bmin!r} at n={n}"
                if not args.allow_below_threshold:
                    raise ConfigError(msg + " (pass --allow-below-threshold to run anyway)")
                warnings.append(msg)
    return dict(template=template, n_grid=n_grid, methods=methods, reps=reps, master_seed=seed,
                beta=None if beta is None else float(beta), mc_budget=mc_budget,
                remainder_budget=remainder_budget, warnings=warnings)


def cmd_run(args) -> int:
    try:
        cfg = _load_json(args.config)
        plan = _prepare_run(cfg, args)
    except ConfigError as exc:
        return _error("invalid-config", str(exc), EXIT_CONFIG)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)

    if args.jobs < 1:
        return _error("invalid-config", "--jobs must be >= 1", EXIT_CONFIG)
    try:
        report = run_study(plan["template"], plan["n_grid"], plan["methods"], plan["reps"], plan["master_seed"],
                           beta=plan["beta"], jobs=args.jobs, mc_budget=plan["mc_budget"],
                           remainder_budget=plan["remainder_budget"])
    except (ValueError, LookupError) as exc:
        return _error("invalid-config", str(exc), EXIT_CONFIG)
    report.warnings.extend(plan["warnings"])
    for w in plan["warnings"]:
        print(json.dumps({"warning": w}), file=sys.stderr)

    stamp = _stamp()
    summary = {"generated": stamp, "version": __version__, "config": cfg, **report.to_dict()}
    out = Path(args.out)
    files: dict[Path, str | bytes] = {
        out / "trials.csv": trials_csv(report, timing=args.timing, stamp=stamp),
        out / "summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n",
        out / "slopes.csv": slopes_csv(report, stamp=stamp),
    }
    if args.plot:
        from .plotting import rate_plot

        buf = io.BytesIO()
        rate_plot(report, buf)
        files[out / "rate_plot.png"] = buf.getvalue()
    try:
        _write_atomic(files)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    return EXIT_OK


# --------------------------------------------------------------------------
# calibrate


def _canonical_kind(kind: str) -> str:
    if kind in SCENARIO_KINDS:
        return kind
    if "-" in kind:
        a, b = kind.split("-", 1)
        if f"{b}-{a}" in SCENARIO_KINDS:
            return f"{b}-{a}"
    raise ConfigError(f"unknown scenario kind {kind!r}; choose from {list(SCENARIO_KINDS)}")


def _parse_assignments(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        try:
            out[name] = float(value)
        except ValueError:
            out[name] = value
    return out


def cmd_calibrate(args) -> int:
    try:
        if args.config:
            spec = _load_json(args.config)
            spec = spec.get("scenario", spec)
            if args.paper_beta:
                spec = {**spec, "paper_beta": True}
            scen = scenario_from_dict(spec)
            policy = scen.policy
        else:
            if not args.kind:
                raise ConfigError("give a scenario KIND or --config")
            kind = _canonical_kind(args.kind)
            policy = beta_for_scenario(kind, _parse_assignments(args.constants), paper_beta=args.paper_beta)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    except (ValueError, TypeError, KeyError) as exc:
        return _error("invalid-config", str(exc), EXIT_CONFIG)
    print(json.dumps(policy.to_dict(), indent=2))
    return EXIT_OK


# --------------------------------------------------------------------------
# check-concavity


def cmd_check_concavity(args) -> int:
    if args.loss not in CONCAVITY_LOSSES:
        return _error("invalid-config", f"unknown loss {args.loss!r}; choose from {list(CONCAVITY_LOSSES)}",
                      EXIT_CONFIG)
    if not math.isfinite(args.beta) or args.beta <= 0:
        return _error("invalid-config", "--beta must be positive", EXIT_CONFIG)
    if args.points < 1 or args.M < 2:
        return _error("invalid-config", "--points must be >= 1 and --M >= 2", EXIT_CONFIG)
    rng = np.random.default_rng(args.seed)
    try:
        if args.loss.endswith("-psi"):
            family = args.loss[: -len("-psi")]
            if args.params:
                params = [float(p) for p in args.params.split(",")]
            else:
                params = list(np.linspace(0.2, 0.8, args.M)) if family == "bernoulli" \
                    else list(np.linspace(1.0, 2.0, args.M))
            report = check_psi_concavity(family, args.beta, params, rng, n_points=args.points)
        else:
            report = catalog_exp_concavity(args.loss, args.beta, rng, M=args.M, n_points=args.points)
    except ValueError as exc:
        return _error("invalid-config", str(exc), EXIT_CONFIG)
    print(json.dumps({"loss": args.loss, "beta": args.beta, "seed": args.seed,
                      "min_eigenvalue_observed": report.min_eigenvalue_observed,
                      "sample_points": report.sample_points, "tolerance": report.tolerance,
                      "passed": bool(report.passed)}, indent=2))
    return EXIT_OK if report.passed else EXIT_FAIL


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mirroravg", description="Mirror-averaging model selection studies.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a replicated study from a JSON config")
    r.add_argument("--config", required=True, help="study config (JSON)")
    r.add_argument("--seed", type=int, help="master seed (overrides the config)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--allow-below-threshold", action="store_true",
                   help="accept a beta override below the calibrated minimum (recorded as a warning)")
    r.add_argument("--paper-beta", action="store_true", help="use the stated phi-loss temperatures")
    r.add_argument("--plot", action="store_true", help="also render rate_plot.png")
    r.add_argument("--timing", action="store_true", help="fill the wall_ms column (breaks byte-identical reruns)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="print the temperature policy for a scenario")
    c.add_argument("kind", nargs="?", help="scenario kind, e.g. density-l2")
    c.add_argument("constants", nargs="*", metavar="NAME=VALUE", help="calibration constants")
    c.add_argument("--config", help="scenario or study config (JSON)")
    c.add_argument("--paper-beta", action="store_true", help="use the stated phi-loss temperatures")
    c.set_defaults(func=cmd_calibrate)

    k = sub.add_parser("check-concavity", help="sample the exp-concavity / concavity condition")
    k.add_argument("loss", help=f"one of {', '.join(CONCAVITY_LOSSES)}")
    k.add_argument("--beta", type=float, required=True)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--points", type=int, default=500)
    k.add_argument("--M", type=int, default=4, help="dictionary size")
    k.add_argument("--params", help="comma-separated family parameters for the Psi checks")
    k.set_defaults(func=cmd_check_concavity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
