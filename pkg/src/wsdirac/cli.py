"""Command-line front end: run scenarios, list them, verify manifests.

Exit codes: 0 all tolerances met, 2 a scientific tolerance failed,
1 execution error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import load_config
from .errors import WsDiracError
from .runner import run_scenario, verify_manifest

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TOLERANCE = 2


def bundled_scenario_dir() -> Path:
    return Path(__file__).parent / "scenarios"


def scenario_search_path(overrides) -> list:
    return [Path(d) for d in overrides] if overrides else [bundled_scenario_dir()]


def discover_scenarios(search_dirs) -> dict:
    """Map scenario name -> config path; first hit wins, duplicates warn."""
    found = {}
    for d in search_dirs:
        if not d.is_dir():
            continue
        for path in sorted(d.glob("*.cfg")):
            try:
                cfg = load_config(path)
            except WsDiracError as exc:
                print(f"warning: skipping {path}: {exc}", file=sys.stderr)
                continue
            if cfg.scenario in found:
                print(f"warning: duplicate scenario '{cfg.scenario}' in {path}; "
                      f"keeping {found[cfg.scenario][0]}", file=sys.stderr)
                continue
            found[cfg.scenario] = (path, cfg.description)
    return found


def _resolve_config(name_or_path: str, search_dirs) -> Path:
    p = Path(name_or_path)
    if p.is_file():
        return p
    scenarios = discover_scenarios(search_dirs)
    if name_or_path in scenarios:
        return scenarios[name_or_path][0]
    raise WsDiracError(
        f"'{name_or_path}' is neither a config file nor a known scenario; "
        f"known: {sorted(scenarios)}"
    )


def _run_one(args):
    path, engine, out_root = args
    cfg = load_config(path)
    out = Path(out_root) / cfg.scenario
    manifest = run_scenario(cfg, out, engine_override=engine)
    return cfg.scenario, manifest.all_passed, out


def cmd_run(args) -> int:
    search = scenario_search_path(args.scenario_dir)
    try:
        paths = [_resolve_config(c, search) for c in args.config]
    except WsDiracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    jobs = [(p, args.engine, args.out) for p in paths]
    results = []
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = [_run_one(j) for j in jobs]
    except WsDiracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    worst = EXIT_OK
    for scenario, passed, out in results:
        status = "ok" if passed else "TOLERANCE FAIL"
        print(f"{scenario}: {status}  ({out})")
        if not passed:
            worst = EXIT_TOLERANCE
    return worst


def cmd_list(args) -> int:
    scenarios = discover_scenarios(scenario_search_path(args.scenario_dir))
    for name in sorted(scenarios):
        _, desc = scenarios[name]
        print(f"{name}\t{desc}")
    return EXIT_OK


def cmd_verify(args) -> int:
    problems = verify_manifest(args.manifest)
    if problems:
        for p in problems:
            print(f"verify: {p}", file=sys.stderr)
        return EXIT_ERROR
    print("manifest ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wsdirac",
                                 description="Wannier-Stark Dirac simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one or more scenarios")
    run.add_argument("config", nargs="+",
                     help="config file path or bundled scenario name")
    run.add_argument("--engine", choices=["discrete", "exact", "both"],
                     default=None, help="override the config's engine")
    run.add_argument("--out", default="runs", help="output directory root")
    run.add_argument("--jobs", type=int, default=1,
                     help="run independent scenarios in parallel")
    run.add_argument("--scenario-dir", action="append", default=[],
                     help="replace the bundled scenario search path")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="list available scenarios")
    lst.add_argument("--scenario-dir", action="append", default=[])
    lst.set_defaults(func=cmd_list)

    ver = sub.add_parser("verify", help="check a run manifest's files")
    ver.add_argument("manifest")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WsDiracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
