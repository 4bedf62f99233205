"""Command-line entry point: ``hypwalk {list,walk,estimate,experiment,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import build_measure, build_model, load_config
from .errors import ConfigError, HypwalkError
from .experiments import CATALOG, check_experiment, run_config, run_estimates
from .report import build_report, load_report, render_tables, write_report
from .walker import export_trajectories_csv, walk_distances

log = logging.getLogger("hypwalk")


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", type=Path, required=config_required, help="experiment config (TOML)")
    p.add_argument("--seed", type=int, help="override the config's master seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    p.add_argument("--threads", type=int, help="worker threads for the walker")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypwalk", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print the experiment catalog")
    _common(sub.add_parser("walk", help="sample trajectories and write their distances"))
    _common(sub.add_parser("estimate", help="run every applicable estimator on one config"))
    p = sub.add_parser("experiment", help="run a bundled experiment or a config")
    _common(p, config_required=False)
    p.add_argument("--experiment", help="experiment id (E1..E5); without --config runs its bundled configs")
    p = sub.add_parser("report", help="re-render a stored report.json into CSV tables and figures")
    p.add_argument("report", type=Path, help="report.json or the directory holding it")
    p.add_argument("--out", type=Path, help="output directory (default: next to the report)")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _load(path: Path, seed: int | None):
    cfg = load_config(path)
    return cfg if seed is None else cfg.with_seed(seed)


def cmd_list(args) -> int:
    for exp in CATALOG.values():
        print(f"{exp.id}  {exp.runtime:>7}  {exp.title}")
        print(f"    anchor: {exp.anchor}")
        print(f"    configs: {', '.join(exp.configs)}")
    return 0


def _walk_runner(out: Path):
    def runner(run):
        res = run.step("walk", walk_distances, run.measure, run.model, run.walk())
        if res is not None:
            out.mkdir(parents=True, exist_ok=True)
            export_trajectories_csv(out / "trajectories.csv", *res)
        run_estimates_mc(run)
    return runner


def run_estimates_mc(run) -> None:
    from .estimators import escape_rate_mc
    run.estimate("escape_rate_mc", run.step("escape-mc", escape_rate_mc, run.measure, run.model, run.walk(),
                                            burn_in=run.param("burn_in", 0)))


def _finish(result, out: Path, command: str, figures: bool = True) -> int:
    path = write_report(build_report(result, {"command": command}), out, figures=figures)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status}  {result.config.experiment}  {Path(result.config.source).name} -> {path}")
    for c in result.checks:
        if not c.passed:
            print(f"  failed {c.name}: {c.inequality} (value {c.value:.6g}, bound {c.bound:.6g}, margin {c.margin:.3g})")
    for e in result.errors:
        print(f"  error in {e['step']}: {e['type']}: {e['message']}")
    return result.exit_code


def cmd_walk(args) -> int:
    cfg = _load(args.config, args.seed)
    return _finish(run_config(cfg, args.threads, runner=_walk_runner(args.out)), args.out, "walk", figures=False)


def cmd_estimate(args) -> int:
    cfg = _load(args.config, args.seed)
    return _finish(run_config(cfg, args.threads, runner=run_estimates), args.out, "estimate")


def cmd_experiment(args) -> int:
    if args.config is not None:
        cfgs = [_load(args.config, args.seed)]
        if args.experiment and args.experiment != cfgs[0].experiment:
            raise ConfigError(f"--experiment {args.experiment} does not match the config's "
                              f"experiment {cfgs[0].experiment!r}")
    elif args.experiment:
        if args.experiment not in CATALOG:
            raise ConfigError(f"unknown experiment {args.experiment!r}; known: {', '.join(CATALOG)}")
        paths = CATALOG[args.experiment].config_paths()
        cfgs = [_load(p, args.seed) for p in paths]
    else:
        raise ConfigError("experiment needs --experiment ID or --config PATH")
    for cfg in cfgs:
        check_experiment(cfg)
        build_measure(cfg, build_model(cfg))
    # every config is valid before anything is written
    codes = []
    for cfg in cfgs:
        out = args.out if len(cfgs) == 1 else args.out / Path(cfg.source).stem
        codes.append(_finish(run_config(cfg, args.threads), out, "experiment"))
    return 3 if 3 in codes else max(codes)


def cmd_report(args) -> int:
    try:
        report = load_report(args.report)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from None
    src = args.report if args.report.is_dir() else args.report.parent
    out = args.out or src
    render_tables(report, out)
    if not args.no_figures:
        from .plotting import render_figures
        render_figures(report, out)
    print(f"rendered {report.get('experiment', '?')} report into {out}")
    return int(report.get("exit_code", 0))


COMMANDS = {"list": cmd_list, "walk": cmd_walk, "estimate": cmd_estimate,
            "experiment": cmd_experiment, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except HypwalkError as exc:
        print(f"hypwalk: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
