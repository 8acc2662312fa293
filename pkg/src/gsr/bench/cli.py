"""Command-line entry point: ``gsr <subcommand> [--config PATH] [--seed S | --seeds N] [--out DIR]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..engine import EngineConfig
from . import experiments as ex
from .functions import BenchmarkSpec

COMMANDS = ("run", "offline", "unknown-space", "race", "delta-plus", "balance")
GP_KEYS = {"kernel_family", "noise_lambda", "standardize", "refit_every", "fit_kernel", "gap_mode", "eps0",
           "n_init", "acquisition"}
EXPERIMENT_KEYS = {"T", "seeds", "methods", "problem", "function", "dim", "steps", "target", "noise_sigma",
                   "sizing_mode", "votes", "generator", "J", "L0", "delta_be", "levels", "probe_budget"}


class ConfigError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            if path.endswith(".json"):
                data = json.load(fh)
            else:
                data = tomllib.load(fh)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    for section, allowed in (("gp", GP_KEYS), ("experiment", EXPERIMENT_KEYS)):
        unknown = set(data.get(section, {})) - allowed
        if unknown:
            raise ConfigError(f"{path}: unknown {section} keys {sorted(unknown)}")
    unknown_sections = set(data) - {"gp", "experiment"}
    if unknown_sections:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown_sections)}")
    return data


def _seeds(args, cfg) -> list[int]:
    if args.seeds is not None:
        return list(range(args.seed, args.seed + args.seeds))
    if "seeds" in cfg:
        return list(range(args.seed, args.seed + int(cfg["seeds"])))
    return [args.seed]


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _curve_rows(curves: dict) -> list[dict]:
    return [{"method": m, "t": t + 1, "regret": float(v)} for m, c in curves.items() for t, v in enumerate(c)]


def _emit(out: str | None, name: str, text: str, fmt: str) -> None:
    if out is None:
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"{name}.{fmt}"), "w", newline="") as fh:
        fh.write(text)


def _print_final(final: dict) -> None:
    for method, (mu, se) in final.items():
        print(f"{method:>20s}  final {mu:.6g} +/- {se:.3g}")


def _engine(base: EngineConfig, gp: dict) -> EngineConfig:
    return EngineConfig(**{**base.__dict__, **gp})


def cmd_run(args, cfg, exp, gp):
    T = int(exp.get("T", 100))
    keys = ("sizing_mode", "votes", "generator", "J")
    params = {k: exp[k] for k in keys if k in exp}
    for seed in _seeds(args, exp):
        log = ex.planted_run(seed, T, engine=_engine(ex.PLANTED_ENGINE, gp), **params)
        if args.format == "json":
            rows = [dict(zip(log.header(), r)) for r in log.rows()]
            text = json.dumps(rows, indent=1) + "\n"
        else:
            text = log.to_csv()
        _emit(args.out, f"run_seed{seed}", text, args.format)
        best, _ = log.best_task()
        print(f"seed {seed}: T={log.T} tasks={log.N_T} level={log.ladder.m} best={best}")


def cmd_offline(args, cfg, exp, gp):
    config = ex.ExperimentConfig(
        "offline_objective", tuple(exp.get("methods", ex.OFFLINE_METHODS)), int(exp.get("T", 200)),
        tuple(_seeds(args, exp)), args.out, {"engine": _engine(ex.OFFLINE_ENGINE, gp)},
    )
    per_seed, summary, final = ex.run_offline_objective_selection(config)
    for seed, curves in per_seed.items():
        _emit(args.out, f"offline_seed{seed}", _table(_curve_rows(curves), args.format), args.format)
    _emit(args.out, "offline_summary", _table(summary, args.format), args.format)
    _print_final(final)


def cmd_unknown(args, cfg, exp, gp):
    problem = exp.get("problem", "beale")
    if problem not in ex.UNKNOWN_SPACE:
        raise ConfigError(f"unknown problem {problem!r}")
    T = int(exp.get("T", ex.UNKNOWN_SPACE[problem].T))
    config = ex.ExperimentConfig(
        "unknown_space", ("gsr", "fixed_bo"), T, tuple(_seeds(args, exp)), args.out,
        {"problem": problem, "engine": _engine(ex.UNKNOWN_SPACE_ENGINE, gp)},
    )
    per_seed, summary, final = ex.run_unknown_space(config)
    for seed, curves in per_seed.items():
        _emit(args.out, f"unknown_{problem}_seed{seed}", _table(_curve_rows(curves), args.format), args.format)
    _emit(args.out, f"unknown_{problem}_summary", _table(summary, args.format), args.format)
    _print_final(final)


def cmd_race(args, cfg, exp, gp):
    fid = exp.get("function", "branin")
    try:
        bench = BenchmarkSpec(fid, int(exp.get("dim", 2)), noise_sigma=float(exp.get("noise_sigma", 0.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    steps = int(exp.get("steps", 30))
    target = exp.get("target", "ei")
    for seed in _seeds(args, exp):
        state, gap, util = ex.run_acq_race(bench, steps, seed, target=target, engine=_engine(EngineConfig(), gp))
        rows = [
            {"s": s + 1, **{f"regret_{a}": state.simple[a][s] for a in state.agents},
             **{f"cumulative_{a}": state.cumulative[a][s] for a in state.agents},
             "gap": float(gap[s]), "utility": float(util[s])}
            for s in range(steps)
        ]
        _emit(args.out, f"race_{fid}_seed{seed}", _table(rows, args.format), args.format)
        print(f"seed {seed}: denom={state.denom:.6g} final gap={gap[-1]:.4g} utility={util[-1]:.4g}")


def cmd_delta_plus(args, cfg, exp, gp):
    levels = range(int(exp.get("levels", 5)))
    seeds = _seeds(args, exp) if (args.seeds or "seeds" in exp) else range(10)
    rows = ex.delta_plus_levels(levels, seeds, int(exp.get("J", 3)), int(exp.get("probe_budget", 10)))
    _emit(args.out, "delta_plus", _table(rows, args.format), args.format)
    for r in rows:
        print(f"m={r['m']}  distance={r['mean_distance']:.4f}  delta_plus={r['delta_plus']:.3f}")


def cmd_balance(args, cfg, exp, gp):
    T = int(exp.get("T", 300))
    for seed in _seeds(args, exp):
        w = ex.balance_run(seed, T, float(exp.get("L0", ex.BALANCE_L0)), delta_be=float(exp.get("delta_be", 0.05)),
                           engine=_engine(ex.BALANCE_ENGINE, gp))
        log = w.log()
        if args.format == "json":
            text = json.dumps([dict(zip(log.header(), r)) for r in log.rows()], indent=1) + "\n"
        else:
            text = log.to_csv()
        _emit(args.out, f"balance_seed{seed}", text, args.format)
        print(f"seed {seed}: active={[h.j for h in w.active]} eliminated={w.eliminated}")


HANDLERS = {
    "run": cmd_run, "offline": cmd_offline, "unknown-space": cmd_unknown, "race": cmd_race,
    "delta-plus": cmd_delta_plus, "balance": cmd_balance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsr", description="Generate-select-refine experiments")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML or JSON file with [gp] and [experiment] tables")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seeds", type=int, help="run seeds seed, seed+1, ..., seed+N-1")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--T", type=int, help="override the horizon")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        exp = dict(cfg.get("experiment", {}))
        if args.T is not None:
            exp["T"] = args.T
        if args.seeds is not None and args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        gp = dict(cfg.get("gp", {}))
        try:
            _engine(EngineConfig(), gp)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid gp settings: {exc}") from None
        HANDLERS[args.command](args, cfg, exp, gp)
    except ConfigError as exc:
        print(f"gsr: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
