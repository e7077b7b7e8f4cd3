"""Command-line front end.

Subcommands map onto the simulation API: ``run`` (one scenario run),
``lvr`` (rebate-capture experiment), ``equilibrium`` (update-gap
distribution), ``sweep`` (producer strategy grid), and ``validate``
(normalize and check a scenario). Outputs are deterministic in
(scenario, seed) — no timestamps, stable key order — so reruns are
byte-identical and diffable.

Exit codes: 0 success, 1 bad input or infeasible scenario, 2 internal
invariant violation (a bug, not a user error).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from . import sim
from .config import builtin_scenarios, load_scenario, scenario_to_dict, scenario_to_json
from .errors import InvariantViolation, V0lverError

BLOCK_COLUMNS = [
    "height", "eps", "pool_x", "pool_y", "pool_price", "pool_k",
    "vault_x", "vault_y", "update", "gap", "beta", "update_price",
    "n_submitted", "n_inserted", "n_revealed", "n_executed", "n_burned",
    "volume_y",
]


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; for us 2 means an internal bug."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _clean(obj):
    """Make a structure strictly JSON-safe (NaN/inf become null)."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _resolve_scenario(spec: str):
    builtins = builtin_scenarios()
    if spec in builtins:
        return builtins[spec]
    return load_scenario(spec)


class _OutDir:
    def __init__(self, path: str, force: bool):
        self.path = path
        self.force = force
        os.makedirs(path, exist_ok=True)

    def target(self, name: str) -> str:
        full = os.path.join(self.path, name)
        if os.path.exists(full) and not self.force:
            raise V0lverError(f"refusing to overwrite {full} (use --force)")
        return full

    def write_json(self, name: str, payload):
        with open(self.target(name), "w") as f:
            json.dump(_clean(payload), f, indent=2, sort_keys=True)
            f.write("\n")

    def write_table(self, stem: str, columns: list, rows: list, fmt: str):
        if fmt == "json":
            self.write_json(f"{stem}.json", rows)
            return
        with open(self.target(f"{stem}.csv"), "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=columns)
            w.writeheader()
            for row in rows:
                w.writerow({k: row.get(k) for k in columns})

    def write_ndjson(self, name: str, records):
        with open(self.target(name), "w") as f:
            for rec in records:
                f.write(json.dumps(_clean(rec), sort_keys=True))
                f.write("\n")


def _summary(command: str, cfg, seed: int, body: dict) -> dict:
    return {"command": command, "scenario": scenario_to_dict(cfg), "seed": seed, **body}


def cmd_run(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    out = _OutDir(args.out, args.force)
    result = sim.run_scenario(cfg, args.seed)
    out.write_json("summary.json", _summary("run", cfg, args.seed,
                                            {"metrics": result.metrics.to_dict()}))
    out.write_table("blocks", BLOCK_COLUMNS, result.blocks, args.format)
    if result.events is not None:
        out.write_ndjson(
            "events.ndjson",
            ({"height": e.height, "kind": e.kind, **e.data} for e in result.events),
        )
    return 0


def cmd_lvr(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    out = _OutDir(args.out, args.force)
    res = sim.lvr_experiment(cfg, args.seed, runs=args.runs, jobs=args.jobs)
    ratios = res.pop("ratios")
    out.write_json("summary.json", _summary("lvr", cfg, args.seed, {"result": res}))
    rows = [{"run": i, "ratio": r} for i, r in enumerate(ratios)]
    out.write_table("ratios", ["run", "ratio"], rows, args.format)
    return 0


def cmd_equilibrium(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    out = _OutDir(args.out, args.force)
    res = sim.equilibrium_experiment(cfg, args.seed, runs=args.runs, jobs=args.jobs)
    out.write_json("summary.json", _summary("equilibrium", cfg, args.seed, {"result": res}))
    rows = [{"gap": g, "count": c} for g, c in sorted(
        (int(g), c) for g, c in res["updates_by_gap"].items())]
    out.write_table("gaps", ["gap", "count"], rows, args.format)
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    out = _OutDir(args.out, args.force)
    res = sim.dominance_sweep(cfg, args.seed, trials=args.trials)
    rows = res.pop("rows")
    out.write_json("summary.json", _summary("sweep", cfg, args.seed, {"result": res}))
    out.write_table("sweep", ["multiplier", "alpha", "utility"], rows, args.format)
    return 0


def cmd_validate(args) -> int:
    cfg = _resolve_scenario(args.scenario)
    text = scenario_to_json(cfg)
    if args.out:
        if os.path.exists(args.out) and not args.force:
            raise V0lverError(f"refusing to overwrite {args.out} (use --force)")
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="v0lver", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, jobs=False):
        p.add_argument("--scenario", required=True,
                       help="scenario file path or builtin name "
                            f"({', '.join(sorted(builtin_scenarios()))})")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        if jobs:
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("run", help="simulate one scenario run")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lvr", help="rebate-capture experiment across runs")
    common(p, jobs=True)
    p.add_argument("--runs", type=int, default=200)
    p.set_defaults(func=cmd_lvr)

    p = sub.add_parser("equilibrium", help="update-gap distribution across runs")
    common(p, jobs=True)
    p.add_argument("--runs", type=int, default=100)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("sweep", help="producer strategy grid payoffs")
    common(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a scenario and print its normal form")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="write the normalized scenario here instead of stdout")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except InvariantViolation as e:
        sys.stderr.write(f"invariant violation: {e}\n")
        return 2
    except V0lverError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except Exception as e:  # noqa: BLE001 — anything unexpected is a bug
        sys.stderr.write(f"internal error: {type(e).__name__}: {e}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
