"""Command-line entry point: ``simcellfree {run,cost,validate,dump-channels}``.

Any configuration field can be overridden with ``--key=value`` (units as
in config files, e.g. ``--transmit_power=30dBm``). Errors exit with the
code of their category (see :mod:`simcellfree.errors`).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .channel import build_propagation, dump_propagation
from .complexity import cost_table_csv
from .errors import ConfigError, SimCellFreeError
from .scenario import SystemConfig, build_layout, convert_units, read_config_file, write_positions_csv


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simcellfree", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("--config", type=Path, help="flat key = value configuration file")
        scale = sp.add_mutually_exclusive_group()
        scale.add_argument("--desk", dest="scale", action="store_const", const="desk")
        scale.add_argument("--paper-scale", dest="scale", action="store_const", const="paper")
        sp.set_defaults(scale="desk")
        sp.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="run a parameter sweep and write CSV")
    run.add_argument("--experiment", required=True, choices=harness.EXPERIMENTS)
    config_args(run)
    run.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    run.add_argument("--trials", type=int)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--grid", help="comma-separated sweep values replacing the default grid")

    cost = sub.add_parser("cost", help="print multiplication counts as CSV")
    cost.add_argument("--grid", default="256,16,8,16,4",
                      help="semicolon-separated N,M,K,L,T tuples (default: %(default)s)")
    cost.add_argument("--out", type=Path)

    val = sub.add_parser("validate", help="run the invariant suite")
    config_args(val)

    dump = sub.add_parser("dump-channels", help="write one channel realisation as CSV files")
    config_args(dump)
    dump.add_argument("--out", type=Path, required=True, help="output directory")
    return p


def _overrides(extra: list[str]) -> dict[str, str]:
    out = {}
    for item in extra:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognised argument {item!r} (overrides are written --key=value)")
        key, value = item[2:].split("=", 1)
        out[key.replace("-", "_")] = value
    return out


def _config(args, extra) -> SystemConfig:
    base = SystemConfig.desk() if args.scale == "desk" else SystemConfig()
    overrides = _overrides(extra)
    if args.config is not None:
        return read_config_file(args.config, base, overrides)
    return convert_units(overrides, base) if overrides else base


def _parse_grid_values(text: str, experiment: str):
    values = []
    for item in text.split(","):
        item = item.strip()
        if experiment == "layers_sweep":
            t, n = item.split("/")
            values.append((int(t), int(n)))
        elif item == "continuous":
            values.append(item)
        else:
            v = float(item)
            values.append(int(v) if v.is_integer() and experiment != "rate_vs_power" else v)
    return values


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8", newline="\n")


def _run(args, extra) -> int:
    if args.experiment == "cost_table":
        _emit(cost_table_csv([(256, 16, 8, 16, 4)]), args.out)
        return 0
    config = _config(args, extra)
    grid = None
    if args.grid:
        try:
            grid = _parse_grid_values(args.grid, args.experiment)
        except ValueError:
            raise ConfigError(f"malformed --grid {args.grid!r}") from None
    trials = args.trials if args.trials is not None else (50 if args.scale == "desk" else 100)
    spec = harness.ExperimentSpec(args.experiment, grid, trials, config, args.seed, args.scale)
    result = harness.run_experiment(spec, workers=args.workers)
    _emit(result.to_csv(), args.out)
    harness.check_failures(result)
    return 0


def _cost(args, extra) -> int:
    if extra:
        raise ConfigError(f"unexpected arguments {extra}")
    try:
        grid = [tuple(int(x) for x in part.split(",")) for part in args.grid.split(";") if part.strip()]
    except ValueError:
        raise ConfigError(f"malformed --grid {args.grid!r}") from None
    if any(len(g) != 5 for g in grid):
        raise ConfigError("each cost tuple needs N,M,K,L,T")
    try:
        _emit(cost_table_csv(grid), args.out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return 0


def _validate(args, extra) -> int:
    checks = harness.validate(_config(args, extra), args.seed)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}" + (f"  ({c.detail})" if c.detail else ""))
    return 0 if all(c.passed for c in checks) else 1


def _dump(args, extra) -> int:
    config = _config(args, extra)
    rng = harness.trial_rng(args.seed, "dump-channels", 0)
    layout = build_layout(config, rng)
    props = build_propagation(config, layout, rng)
    written = dump_propagation(props, args.out)
    write_positions_csv(args.out / "ap_positions.csv", layout.ap_positions)
    write_positions_csv(args.out / "ue_positions.csv", layout.ue_positions)
    for p in written:
        logging.getLogger(__name__).info("wrote %s", p)
    return 0


COMMANDS = {"run": _run, "cost": _cost, "validate": _validate, "dump-channels": _dump}


def main(argv=None) -> int:
    args, extra = _parser().parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, extra)
    except SimCellFreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
