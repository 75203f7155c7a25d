"""Command-line interface: one binary, one subcommand per experiment kind.

Exit codes: 0 on success and all anchors passing, 1 when a repro anchor
fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .config_io import (
    config_hash,
    csv_text,
    parse_config,
    provenance_line,
    write_csv,
)
from .engine import BoundingMode, EventRecord, StopRule, simulate
from .errors import RedlabError
from .model import RngSpec
from .manifest import (
    load_manifest,
    manifest_from_dict,
    run_boundary,
    run_fluid,
    run_lt,
    run_manifest,
    run_saturate,
    run_simulate,
    run_sweep,
)
from .model import build_type_table

USAGE_ERROR = 2
ANCHOR_FAIL = 1


def parse_rho_spec(text: str) -> list[float]:
    """Load grid: either start:step:stop (stop inclusive) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"need step > 0 and stop >= start in {text!r}")
        out = []
        k = 0
        while True:
            v = start + k * step
            if v > stop + 1e-9:
                break
            out.append(round(v, 12))
            k += 1
        return out
    return [float(p) for p in text.split(",") if p]


def _emit(header, rows, provenance, out_path):
    """Write CSV to the path, or stdout when no path is given."""
    if out_path is None:
        sys.stdout.write(csv_text(header, rows, provenance))
    else:
        write_csv(out_path, header, rows, provenance)


def _write_trace(path, records: list[EventRecord], K: int, d: int):
    table = build_type_table(K, d)
    counts = [0] * table.n_types
    header = ["time", "event", "job_id", "type_id", "server", "N_total"] + [
        f"N_{'-'.join(str(s + 1) for s in table.types[c])}" for c in range(table.n_types)
    ]
    rows = []
    for rec in records:
        if rec.kind == "arrival" and not rec.zero_sojourn:
            counts[rec.type_id] += 1
        elif rec.kind == "departure":
            counts[rec.type_id] -= 1
        rows.append(
            (rec.time, rec.kind, rec.job_id, rec.type_id, rec.server, rec.n_total, *counts)
        )
    write_csv(path, header, rows)


def _cmd_simulate(args) -> int:
    config = parse_config(args.config)
    params = {"config": Path(args.config).read_text(encoding="utf-8")}
    if args.busy_periods is not None:
        params["busy_periods"] = args.busy_periods
    if args.horizon is not None:
        params["horizon"] = args.horizon
    if args.max_events is not None:
        params["max_events"] = args.max_events
    params["mode"] = args.mode
    metrics, header, rows, provenance = run_simulate(params, paper_scale=args.paper_scale)
    _emit(header, rows, provenance, args.out)
    if args.trace is not None:
        records: list[EventRecord] = []
        stop = StopRule(
            busy_periods=args.busy_periods,
            horizon=args.horizon,
            max_events=args.max_events if args.max_events is not None else 200_000,
        )
        simulate(
            config,
            RngSpec(config.seed, 0),
            stop,
            mode=BoundingMode(args.mode),
            trace=records,
        )
        _write_trace(args.trace, records, config.K, config.d)
    return 0


def _cmd_saturate(args) -> int:
    params = {"K": args.K, "d": args.d, "method": args.method, "seed": args.seed}
    if args.departures is not None:
        params["departures"] = args.departures
    metrics, header, rows, provenance = run_saturate(params, paper_scale=args.paper_scale)
    _emit(header, rows, provenance, args.out)
    return 0


def _cmd_sweep(args) -> int:
    params = {
        "config": Path(args.config).read_text(encoding="utf-8"),
        "rho_list": parse_rho_spec(args.rho),
        "reps": args.reps,
    }
    if args.busy_periods is not None:
        params["busy_periods"] = args.busy_periods
    if args.horizon is not None:
        params["horizon"] = args.horizon
    metrics, header, rows, provenance = run_sweep(params, paper_scale=args.paper_scale)
    _emit(header, rows, provenance, args.out)
    return 0


def _cmd_boundary(args) -> int:
    params = {
        "config": Path(args.config).read_text(encoding="utf-8"),
        "lo": args.lo,
        "hi": args.hi,
        "tol": args.tol,
    }
    metrics, header, rows, provenance = run_boundary(params)
    _emit(header, rows, provenance, args.out)
    sys.stderr.write(
        f"bracket ({metrics['bracket_lo']:.4f}, {metrics['bracket_hi']:.4f}) "
        f"theory {metrics['rho_star_theory']}\n"
    )
    return 0


def _cmd_lt(args) -> int:
    params = {
        "policy": args.policy,
        "K": args.K,
        "d": args.d,
        "lambda": args.lam,
        "mu": args.mu,
    }
    metrics, header, rows, provenance = run_lt(params)
    _emit(header, rows, provenance, args.out)
    return 0


def _cmd_fluid(args) -> int:
    params = {
        "config": Path(args.config).read_text(encoding="utf-8"),
        "field": args.field,
        "init": [float(v) for v in args.init.split(",") if v],
        "t_end": args.t_end,
        "dt": args.dt,
    }
    metrics, header, rows, provenance = run_fluid(params)
    _emit(header, rows, provenance, args.out)
    return 0


def _cmd_repro(args) -> int:
    if args.manifest is not None:
        manifest = load_manifest(args.manifest)
    else:
        import json

        payload = (
            resources.files("redlab").joinpath("data/repro_manifest.json").read_text("utf-8")
        )
        manifest = manifest_from_dict(json.loads(payload))
    report = run_manifest(
        manifest, out_dir=args.out, jobs=args.jobs, paper_scale=args.paper_scale
    )
    for line in report.summary_lines():
        print(line)
    print(f"manifest_hash={report.manifest_hash}")
    return ANCHOR_FAIL if report.any_fail else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redlab",
        description="Simulation lab for redundancy-d multi-server systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="replicated time-average run for one config")
    p.add_argument("--config", required=True, help="flat key=value experiment file")
    p.add_argument("--busy-periods", type=int, default=None, dest="busy_periods")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--max-events", type=int, default=None, dest="max_events")
    p.add_argument(
        "--mode",
        choices=[m.value for m in BoundingMode],
        default="exact",
        help="exact dynamics or one of the processor-sharing bounding systems",
    )
    p.add_argument("--out", default=None, help="metrics CSV path (default stdout)")
    p.add_argument(
        "--trace",
        default=None,
        help="also write an event trace CSV from stream 0 (server -1 = not tied to one server)",
    )
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("saturate", help="saturated-system mean in-service job count")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--method", choices=["auto", "mc", "exact", "closed"], default="auto")
    p.add_argument("--departures", type=int, default=None)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--out", default=None)
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale")
    p.set_defaults(fn=_cmd_saturate)

    p = sub.add_parser("sweep", help="mean jobs against offered load")
    p.add_argument("--config", required=True)
    p.add_argument("--rho", required=True, help="start:step:stop or comma list")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--busy-periods", type=int, default=None, dest="busy_periods")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("boundary", help="bracket the stability boundary by bisection")
    p.add_argument("--config", required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_boundary)

    p = sub.add_parser("lt", help="light-traffic mean-job approximation")
    p.add_argument("--policy", choices=["fcfs", "ps", "ros"], required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", type=float, required=True, dest="lam")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_lt)

    p = sub.add_parser("fluid", help="integrate a fluid trajectory")
    p.add_argument("--field", choices=["iid", "lb", "ros"], required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--init", required=True, help="comma list: one mass per job type")
    p.add_argument("--t-end", type=float, required=True, dest="t_end")
    p.add_argument("--dt", type=float, default=0.001)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_fluid)

    p = sub.add_parser("repro", help="run the anchored experiment manifest")
    p.add_argument("--manifest", default=None, help="manifest JSON (default: packaged)")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale")
    p.set_defaults(fn=_cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RedlabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
