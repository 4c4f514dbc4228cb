"""Command-line entry point.

    invy run [CONFIG] [--preset NAME ...] [overrides]
    invy audit [CONFIG] [--preset NAME ...]
    invy oracle-compare [CONFIG] [--preset NAME ...]
    invy presets list
    invy presets dump PATH [--preset NAME ...]

Exit status: 0 ok, 1 invariant breach, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .runner import audit_invariants, oracle_compare, run_scenario
from .scenarios import PRESETS, ConfigError, dump_config, get_preset, load_config

EXIT_OK, EXIT_BREACH, EXIT_CONFIG = 0, 1, 2


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="INI file, one scenario per section")
    p.add_argument("--preset", action="append", default=[], help="bundled preset name (repeatable)")
    p.add_argument("--section", action="append", default=[], help="only run these config sections")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("overrides")
    g.add_argument("--nbar", type=float, dest="n_bar")
    g.add_argument("--mu", type=float)
    g.add_argument("--chi", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--delta1", type=float, dest="delta_cap_1")
    g.add_argument("--delta3", type=float, dest="delta_cap_3")
    g.add_argument("--delta4", type=float, dest="delta_cap_4")
    g.add_argument("--cutoff", type=int)
    g.add_argument("--tau-max", type=float, dest="tau_max")
    g.add_argument("--tau-step", type=float, dest="tau_step")
    g.add_argument("--theta-grid", type=int, dest="theta_grid")
    g.add_argument("--time-independent", action="store_true", default=None)
    g.add_argument(
        "--literal-paper-normalization", action="store_true", default=None,
        help="do not renormalize the truncated initial field",
    )


_OVERRIDE_KEYS = (
    "n_bar", "mu", "chi", "k", "delta_cap_1", "delta_cap_3", "delta_cap_4",
    "cutoff", "tau_max", "tau_step", "theta_grid", "time_independent",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invy", description="Five-level atom in a Kerr cavity: inversion and phase statistics."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run scenarios and write CSV files")
    _add_selection(run)
    _add_overrides(run)
    run.add_argument("--out-dir", default=".")
    run.add_argument("--oracle-compare", action="store_true", help="also run the RK4 oracle")

    audit = sub.add_parser("audit", help="run the invariant suite")
    _add_selection(audit)
    _add_overrides(audit)

    oracle = sub.add_parser("oracle-compare", help="compare closed form against RK4")
    _add_selection(oracle)
    _add_overrides(oracle)

    presets = sub.add_parser("presets", help="bundled figure presets")
    psub = presets.add_subparsers(dest="presets_command", required=True)
    psub.add_parser("list")
    dump = psub.add_parser("dump", help="write presets as a config file")
    dump.add_argument("path")
    dump.add_argument("--preset", action="append", default=[])
    return parser


def _select(args) -> list:
    scenarios = []
    if args.config:
        scenarios = load_config(args.config)
        if args.section:
            wanted = set(args.section)
            scenarios = [s for s in scenarios if s.name in wanted]
            missing = wanted - {s.name for s in scenarios}
            if missing:
                raise ConfigError(f"sections not found: {sorted(missing)}")
    scenarios += [get_preset(p) for p in args.preset]
    if not scenarios:
        raise ConfigError("nothing to run: give a config file or --preset")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names must be unique")
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    if getattr(args, "literal_paper_normalization", None):
        overrides["renormalize"] = False
    if getattr(args, "oracle_compare", False):
        overrides["oracle_compare"] = True
    return [s.with_overrides(**overrides) for s in scenarios]


def _cmd_run(args) -> int:
    status = EXIT_OK
    for s in _select(args):
        summary = run_scenario(s, args.out_dir)
        print(json.dumps({"scenario": s.name, "ok": summary.ok, "files": summary.files,
                          "wall_time": round(summary.wall_time, 3)}))
        if not summary.ok:
            print(f"invariant breach in {s.name}: {summary.failed_invariants}", file=sys.stderr)
            status = EXIT_BREACH
    return status


def _cmd_audit(args) -> int:
    status = EXIT_OK
    for s in _select(args):
        report = audit_invariants(s)
        print("\n".join(report.lines()))
        if not report.passed:
            status = EXIT_BREACH
    return status


def _cmd_oracle(args) -> int:
    status = EXIT_OK
    for s in _select(args):
        rep = oracle_compare(s)
        flag = "PASS" if rep.passed else "FAIL"
        print(f"{flag}  {s.name}  max|A_closed - A_ode|={rep.max_deviation:.3e}  "
              f"tol={rep.tolerance:.0e}  wall={rep.wall_time:.1f}s")
        if not rep.passed:
            status = EXIT_BREACH
    return status


def _cmd_presets(args) -> int:
    if args.presets_command == "list":
        for name, s in PRESETS.items():
            print(f"{name:8s} {s.mode:18s} {s.description}")
        return EXIT_OK
    chosen = [get_preset(p) for p in args.preset] or list(PRESETS.values())
    dump_config(chosen, args.path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "audit": _cmd_audit, "oracle-compare": _cmd_oracle,
                "presets": _cmd_presets}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
