"""Command-line front end.

Examples:
  equiaffine invariants cc.srf --grid 3
  equiaffine check gradgraph.srf
  equiaffine verify perturbed.srf --seed 7
  equiaffine oracle parabolas.srf --format pretty

Exit codes: 0 success, 1 failed verification or runtime error,
2 parse error, 3 degenerate surface.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field

from .dsl import DslError, load_surface
from .frame import MIN_ORDER, TOL_DEGENERATE, DegenerateSurface, FrameError, point_geometry
from .invariants import TOL_RANK, TOL_RANK_ABS, invariant_report
from .jets import DomainError
from .lagrangian import (
    DEFAULT_GRID,
    MAX_DEGENERATE_FRACTION,
    TOL_PARALLEL,
    TOL_PDE,
    Tolerances,
    decide,
    oracle_parallel_forms,
    sample_grid,
)
from .verify import run_verification

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DEGENERATE = 0, 1, 2, 3

CSV_COLUMNS = (
    ["u", "v", "status", "epsilon", "delta", "rank_H", "sigma1", "sigma2", "A", "B", "eta"]
    + ["G1", "G2", "L11", "L12", "L21", "L22", "F11", "F12", "F21", "F22"]
    + [f"C{i}_{k}" for i in (1, 2) for k in ("111", "112", "122", "222")]
    + ["E1", "E2", "E3", "E4", "ill_conditioned", "error"]
)


@dataclass
class RunConfig:
    command: str
    path: str
    grid: int = DEFAULT_GRID
    order: int = MIN_ORDER
    tol_rank: float = TOL_RANK
    tol_pde: float = TOL_PDE
    tol_parallel: float = TOL_PARALLEL
    tol_degenerate: float = TOL_DEGENERATE
    step: float | None = None
    fmt: str = "json"
    seed: int = 42
    oracle: bool = True
    points: list = field(default_factory=list)

    def validate(self) -> None:
        if self.grid < 3:
            raise ValueError("--grid must be at least 3")
        if self.order < MIN_ORDER:
            raise ValueError(f"--order must be at least {MIN_ORDER}")
        for name in ("tol_rank", "tol_pde", "tol_parallel", "tol_degenerate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive")
        if self.step is not None and not self.step > 0:
            raise ValueError("--step must be positive")

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(
            rank=self.tol_rank,
            rank_abs=TOL_RANK_ABS,
            pde=self.tol_pde,
            parallel=self.tol_parallel,
            degenerate=self.tol_degenerate,
        )


def parse_point(text: str) -> tuple[float, float]:
    try:
        u, v = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected u,v but got {text!r}")
    return u, v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equiaffine",
        description="Equiaffine invariants of surfaces in R^4 and Lagrangian detection",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("\n\n", 1)[1],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "invariants": "per-point invariant reports over a grid",
        "check": "decide whether the surface is Lagrangian for a parallel symplectic form",
        "verify": "run the frame-change and bundle identity suite",
        "oracle": "brute-force null space of parallel forms vanishing on the surface",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("path", help="surface definition (.srf)")
        p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="grid size N (N x N points)")
        p.add_argument("--order", type=int, default=MIN_ORDER, help="jet order (default: %(default)s)")
        p.add_argument("--tol-rank", type=float, default=TOL_RANK, help="relative rank tolerance")
        p.add_argument("--tol-pde", type=float, default=TOL_PDE, help="PDE residual tolerance")
        p.add_argument("--tol-parallel", type=float, default=TOL_PARALLEL)
        p.add_argument("--tol-degenerate", type=float, default=TOL_DEGENERATE)
        p.add_argument("--step", type=float, default=None, help="finite-difference step")
        p.add_argument(
            "--format", dest="fmt", choices=("json", "csv", "pretty"), default="json"
        )
        p.add_argument("--seed", type=int, default=42, help="random seed (default: 42)")
        p.add_argument("--no-oracle", dest="oracle", action="store_false")
        p.add_argument(
            "--point", dest="points", type=parse_point, action="append", default=[],
            help="sample point u,v (repeatable; replaces the grid)",
        )
    return parser


# -- commands ---------------------------------------------------------------------------


def _point_record(chart, p, config: RunConfig) -> dict:
    try:
        geom = point_geometry(chart, p, config.order, tol_degenerate=config.tol_degenerate)
        rep = invariant_report(geom, config.tol_rank, TOL_RANK_ABS)
    except DegenerateSurface as exc:
        return {"point": list(p), "status": "degenerate", "error": str(exc)}
    except (FrameError, DomainError, ArithmeticError) as exc:
        return {"point": list(p), "status": "error", "error": f"{type(exc).__name__}: {exc}"}
    rec = rep.to_dict()
    rec["status"] = "ok"
    return rec


def cmd_invariants(chart, config: RunConfig, out) -> int:
    points = config.points or sample_grid(chart, config.grid)
    records = [_point_record(chart, p, config) for p in points]
    degenerate = sum(r["status"] == "degenerate" for r in records)
    if degenerate > MAX_DEGENERATE_FRACTION * len(records):
        print(
            f"DegenerateSurface: {degenerate} of {len(records)} points are degenerate",
            file=sys.stderr,
        )
        return EXIT_DEGENERATE
    if config.fmt == "json":
        for r in records:
            out.write(json.dumps(r) + "\n")
    elif config.fmt == "csv":
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow(_csv_row(r))
    else:
        for r in records:
            out.write(_pretty_record(r) + "\n")
    return EXIT_OK


def _csv_row(r: dict) -> dict:
    row = {k: "" for k in CSV_COLUMNS}
    row.update(u=r["point"][0], v=r["point"][1], status=r["status"], error=r.get("error", ""))
    if r["status"] != "ok":
        return row
    kernel = r["kernel_AB"] or ["", ""]
    row.update(
        epsilon=r["epsilon"],
        delta=r["delta"],
        rank_H=r["rank_H"],
        sigma1=r["singular_values"][0],
        sigma2=r["singular_values"][1],
        A=kernel[0],
        B=kernel[1],
        eta="" if r["eta"] is None else r["eta"],
        G1=r["G1"],
        G2=r["G2"],
        ill_conditioned=r["ill_conditioned"],
    )
    for name in ("L", "F"):
        for i in range(2):
            for j in range(2):
                row[f"{name}{i + 1}{j + 1}"] = r[name][i][j]
    for i in (1, 2):
        for k, val in r[f"C{i}"].items():
            row[f"C{i}_{k}"] = val
    for i, val in enumerate(r["E"]):
        row[f"E{i + 1}"] = val
    return row


def _pretty_record(r: dict) -> str:
    u, v = r["point"]
    if r["status"] != "ok":
        return f"({u:+.4f}, {v:+.4f})  {r['status']}: {r['error']}"
    kernel = "-" if r["kernel_AB"] is None else "[{:+.6f}, {:+.6f}]".format(*r["kernel_AB"])
    eta = "-" if r["eta"] is None else f"{r['eta']:+.6f}"
    return (
        f"({u:+.4f}, {v:+.4f})  eps={r['epsilon']:+d}  delta={r['delta']:.6g}  "
        f"rank={r['rank_H']}  kernel={kernel}  eta={eta}  "
        f"G=({r['G1']:+.6g}, {r['G2']:+.6g})  max|E|={max(map(abs, r['E'])):.1e}"
    )


def cmd_check(chart, config: RunConfig, out) -> int:
    verdict = decide(
        chart,
        grid=config.grid,
        tolerances=config.tolerances,
        step=config.step,
        points=config.points or None,
        oracle=config.oracle,
        order=config.order,
    )
    data = verdict.to_dict()
    if config.fmt == "json":
        out.write(json.dumps(data, indent=2) + "\n")
    elif config.fmt == "csv":
        _write_flat_csv(data, out)
    else:
        ev = data["evidence"]
        out.write(f"kind: {data['kind']}\n")
        if data["omega"] is not None:
            out.write("omega (12 13 14 23 24 34): " + " ".join(f"{x:+.6f}" for x in data["omega"]) + "\n")
            out.write(f"wedge_ratio: {data['wedge_ratio']:+.6f}\n")
        out.write(f"rank histogram: {ev['rank_histogram']}\n")
        out.write(f"max PDE residual: {ev['max_pde_residual']}\n")
        out.write(f"oracle dimension: {ev['oracle_dim']} (agrees: {ev['oracle_agrees']})\n")
        out.write(f"skipped points: {len(ev['skipped_points'])}\n")
    return EXIT_OK


def cmd_verify(chart, config: RunConfig, out) -> int:
    results = run_verification(chart, seed=config.seed, points=config.points or None)
    failed = [r for r in results if not r.passed]
    if config.fmt == "json":
        payload = {
            "surface": chart.name,
            "seed": config.seed,
            "passed": not failed,
            "checks": [r.to_dict() for r in results],
        }
        out.write(json.dumps(payload, indent=2) + "\n")
    elif config.fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["name", "passed", "max_residual", "tolerance", "count", "note"])
        for r in results:
            writer.writerow([r.name, r.passed, r.max_residual, r.tolerance, r.count, r.note])
    else:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            if not r.applicable:
                status = "n/a "
            out.write(
                f"{status}  {r.name:32s} max {r.max_residual:.2e}  tol {r.tolerance:.0e}  "
                f"n={r.count}{'  (' + r.note + ')' if r.note else ''}\n"
            )
    return EXIT_FAIL if failed else EXIT_OK


def cmd_oracle(chart, config: RunConfig, out) -> int:
    samples = config.points or None
    res = oracle_parallel_forms(chart, samples)
    data = res.to_dict()
    if config.fmt == "json":
        out.write(json.dumps(data, indent=2) + "\n")
    elif config.fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["index", "w12", "w13", "w14", "w23", "w24", "w34", "nondegenerate"])
        for i, (b, nd) in enumerate(zip(data["basis"], data["nondegenerate"])):
            writer.writerow([i, *b, nd])
    else:
        out.write(f"null space dimension: {res.dimension} ({res.trichotomy})\n")
        for b, nd in zip(res.basis, res.nondegenerate):
            tag = "nondegenerate" if nd else "degenerate"
            out.write("  " + " ".join(f"{x:+.6f}" for x in b) + f"  {tag}\n")
    return EXIT_OK


def _write_flat_csv(data: dict, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["key", "value"])

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        else:
            writer.writerow([prefix, json.dumps(obj)])

    walk("", data)


COMMANDS = {
    "invariants": cmd_invariants,
    "check": cmd_check,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    config = RunConfig(
        command=args.command,
        path=args.path,
        grid=args.grid,
        order=args.order,
        tol_rank=args.tol_rank,
        tol_pde=args.tol_pde,
        tol_parallel=args.tol_parallel,
        tol_degenerate=args.tol_degenerate,
        step=args.step,
        fmt=args.fmt,
        seed=args.seed,
        oracle=args.oracle,
        points=args.points,
    )
    try:
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        chart = load_surface(config.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DslError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        return COMMANDS[config.command](chart, config, out)
    except DegenerateSurface as exc:
        print(f"DegenerateSurface: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FrameError, DomainError, ArithmeticError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
