"""``cl`` command line: list, run, report, lattice."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..envsim.families import FAMILIES
from ..methods.registry import get_method, method_names
from ..taxonomy import (
    TaxonomyError,
    canonical_catalog,
    concrete_settings,
    descendants,
    get_setting,
    lattice_dot,
    lattice_json,
)
from .config import ConfigError, load_config
from .plugins import PluginError, load_manifest, register_plugin
from .report import ReportError, report
from .runner import RunFailure, run

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 2, 3

log = logging.getLogger("cltree")


def _vector(a) -> str:
    d = a.to_dict()
    return " ".join(f"{k}={v}" for k, v in d.items())


def list_entities(kind: str, include_abstract: bool = False) -> list[dict]:
    """Rows describing settings, methods or environment families."""
    if kind == "settings":
        nodes = canonical_catalog() if include_abstract else concrete_settings()
        return [{"name": n.name, "abstract": n.abstract, "assumptions": n.assumptions.to_dict(),
                 "parents": list(n.parents)} for n in nodes]
    if kind == "methods":
        rows = []
        for name in method_names():
            e = get_method(name)
            target = get_setting(e.target).assumptions
            rows.append({"name": name, "target": e.target, "plugin": e.plugin is not None,
                         "applies_to": descendants(target), "description": e.description})
        return rows
    if kind == "envs":
        return [{"name": f.name, "branch": f.branch.value, "continuous_tasks": f.continuous_tasks,
                 "description": f.description} for f in FAMILIES.values()]
    raise ValueError(f"unknown entity kind {kind!r}")


def _print_table(kind: str, rows: list[dict]):
    if kind == "settings":
        for r in rows:
            a = r["assumptions"]
            print(f"{r['name']:<34} {a['context_continuity']:<10} {a['boundary_signal']:<9} "
                  f"{a['context_observed']:<8} {a['stationarity']:<14} {a['branch']:<11} "
                  f"parents={','.join(r['parents']) or '-'}")
    elif kind == "methods":
        for r in rows:
            tag = " [plugin]" if r["plugin"] else ""
            print(f"{r['name']:<16} target={r['target']:<28} applies to {len(r['applies_to'])}: "
                  f"{', '.join(r['applies_to'])}{tag}")
    else:
        for r in rows:
            print(f"{r['name']:<20} {r['branch']:<8} {r['description']}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cl", description="Continual-learning settings harness")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    ls = sub.add_parser("list", help="list settings, methods or environment families")
    ls.add_argument("kind", choices=["settings", "methods", "envs"])
    ls.add_argument("--all", action="store_true", help="include abstract settings")
    ls.add_argument("--json", action="store_true", help="print JSON instead of a table")
    ls.add_argument("--plugin", action="append", default=[], metavar="MANIFEST",
                    help="register a plugin manifest first (repeatable)")

    r = sub.add_parser("run", help="run a config over its seeds")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--jobs", type=int, default=1, metavar="N")
    r.add_argument("--out", metavar="DIR", help="output directory (default: config output_dir)")

    rep = sub.add_parser("report", help="aggregate run directories into CSV files")
    rep.add_argument("dirs", nargs="+", metavar="DIR")
    rep.add_argument("--reference", metavar="METHOD",
                     help="method whose wall time normalizes runtimes (default: from config)")
    rep.add_argument("--reference-time", type=float, metavar="SECONDS")
    rep.add_argument("--min-runtime", type=float, metavar="SECONDS")
    rep.add_argument("--max-runtime", type=float, metavar="SECONDS")
    rep.add_argument("--out", default="report", metavar="DIR")

    lat = sub.add_parser("lattice", help="print the settings lattice")
    lat.add_argument("--format", choices=["json", "dot"], default="json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            for path in args.plugin:
                register_plugin(load_manifest(path), exist_ok=True)
            rows = list_entities(args.kind, args.all)
            if args.json:
                print(json.dumps(rows, indent=2))
            else:
                _print_table(args.kind, rows)
        elif args.command == "lattice":
            print(lattice_json() if args.format == "json" else lattice_dot())
        elif args.command == "run":
            if args.jobs < 1:
                raise ConfigError("malformed", "--jobs must be at least 1")
            cfg = load_config(args.config)
            print(run(cfg, jobs=args.jobs, out=args.out))
        elif args.command == "report":
            if (args.min_runtime is None) != (args.max_runtime is None):
                raise ConfigError("malformed", "give both --min-runtime and --max-runtime")
            paths = report(args.dirs, args.out, args.reference, args.reference_time,
                           args.min_runtime, args.max_runtime)
            for p in paths.values():
                print(p)
    except (ConfigError, ReportError, TaxonomyError) as err:
        print(f"cl: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as err:
        print(f"cl: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailure as err:
        print(f"cl: run failed: {err}", file=sys.stderr)
        print(err.run_dir)
        return EXIT_RUN
    except PluginError as err:
        print(f"cl: plugin failure: {err}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
