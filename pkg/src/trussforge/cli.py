"""Command line entry point: ``python -m trussforge``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path


from . import __version__
from .gsm import size_truss
from .io import (
    SpecFormatError,
    dumps,
    export_obj,
    export_svg,
    fixture_names,
    fixture_path,
    parse_spec,
    read_truss,
    truss_to_dict,
)
from .model import FunctionalSpec, PipelineParams, Truss, TrussError, UnsupportableError, equilibrium_residual
from .pipeline import _VARIANTS, init_truss, run_pipeline
from .stability import check_external_stability
from .subdivision import subdivide

log = logging.getLogger("trussforge")

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2
RESIDUAL_TOL = 1e-8


def _resolve(path: str) -> Path:
    """A path on disk, or the name of a bundled fixture (``fixtures/hemp.json`` also works)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name[:-5] if p.name.endswith(".json") else p.name
    if name in fixture_names():
        return fixture_path(name)
    return p


def _load_spec(path: str) -> FunctionalSpec:
    return parse_spec(_resolve(path))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_truss(truss: Truss, spec: FunctionalSpec, phase: str, out: str | None) -> None:
    _emit(dumps(truss_to_dict(truss, spec, phase)), out)


def _write_geometry(truss: Truss, svg: str | None, obj: str | None) -> None:
    if svg:
        Path(svg).write_text(export_svg(truss))
    if obj:
        text, sidecar = export_obj(truss)
        Path(obj).write_text(text)
        Path(obj).with_suffix(".areas.json").write_text(dumps(sidecar))


def cmd_optimize(args) -> int:
    spec = _load_spec(args.spec)
    params = spec.params
    if args.levels is not None:
        params = replace(params, p_max2=args.levels)
    if args.n is not None:
        params = replace(params, n=args.n)
    spec = replace(spec, params=params)
    truss, report = run_pipeline(spec)
    for ph in report.phases:
        print(f"{ph.label:>16}  bars {ph.bars:5d}  volume {ph.volume:.6f}  {ph.seconds:7.2f}s", file=sys.stderr)
    _write_truss(truss, spec, "final", args.output)
    _write_geometry(truss, args.svg, args.obj)
    return EXIT_OK


def cmd_gsm(args) -> int:
    spec = _load_spec(args.spec)
    n = args.n if args.n is not None else spec.params.n
    truss, res = size_truss(init_truss(spec, n), spec)
    print(f"ground structure: {len(truss.bars)} bars, volume {res.volume:.6f}", file=sys.stderr)
    _write_truss(truss, spec, "ground structure", args.output)
    _write_geometry(truss, args.svg, None)
    return EXIT_OK


def cmd_subdivide(args) -> int:
    spec = _load_spec(args.spec)
    truss = read_truss(_resolve(args.truss))
    for variant in _VARIANTS:
        finer = subdivide(truss, spec, **variant)
        try:
            finer, res = size_truss(finer, spec)
        except UnsupportableError:
            continue
        break
    else:
        raise UnsupportableError("no subdivision variant can carry the loads")
    print(f"subdivided: {len(truss.bars)} -> {len(finer.bars)} bars, volume {res.volume:.6f}", file=sys.stderr)
    _write_truss(finer, spec, "subdivided", args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    spec = _load_spec(args.spec)
    truss = read_truss(_resolve(args.truss))
    rep = check_external_stability(truss, spec)
    lines = [
        f"bars {rep.bars}  reactions {rep.reactions}  joints {rep.joints}",
        f"external stability: {'stable' if rep.stable else f'unstable (deficit {rep.deficit})'}",
    ]
    worst = 0.0
    for k in range(spec.load_cases):
        r = equilibrium_residual(truss, spec, k)
        worst = max(worst, r)
        lines.append(f"load case {k}: equilibrium residual {r:.3e}")
    print("\n".join(lines))
    if worst > RESIDUAL_TOL:
        print(f"equilibrium residual {worst:.3e} exceeds {RESIDUAL_TOL:g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


@dataclass(frozen=True)
class BenchRow:
    name: str
    phases: tuple[tuple[str, int, float, float], ...]
    seconds: float
    error: str = ""


def bench_one(name: str) -> BenchRow:
    t0 = time.perf_counter()
    try:
        spec = parse_spec(fixture_path(name))
        _, report = run_pipeline(spec)
    except TrussError as exc:
        return BenchRow(name, (), time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
    phases = tuple((p.label, p.bars, p.volume, p.seconds) for p in report.phases)
    return BenchRow(name, phases, time.perf_counter() - t0)


def bench_workers() -> int:
    raw = os.environ.get("TRUSSFORGE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def format_bench(rows: list[BenchRow]) -> str:
    out = []
    for row in rows:
        if row.error:
            out.append(f"{row.name:<16} {row.error}")
            continue
        cells = [f"{label}: {bars} / {vol:.4f} / {sec:.2f}s" for label, bars, vol, sec in row.phases if label != "final"]
        final = row.phases[-1]
        out.append(f"{row.name:<16} final {final[2]:.6f} ({final[1]} bars, {row.seconds:.1f}s) | " + " | ".join(cells))
    return "\n".join(out) + "\n"


def cmd_bench(args) -> int:
    names = [n for n in fixture_names() if not args.filter or args.filter in n]
    if not names:
        print(f"no fixture matches {args.filter!r}", file=sys.stderr)
        return EXIT_INPUT
    workers = min(bench_workers(), len(names))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(bench_one, names))
    else:
        rows = [bench_one(n) for n in names]
    sys.stdout.write("fixture          bars / volume / time per phase\n")
    sys.stdout.write(format_bench(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trussforge", description="Minimum-volume truss layout optimization.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the full pipeline")
    p.add_argument("spec")
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.add_argument("--obj", help="OBJ export (areas go to a .areas.json sidecar)")
    p.add_argument("--levels", type=int, help="subdivision levels (overrides p_max2)")
    p.add_argument("--n", type=int, help="grid points per axis")
    p.add_argument("--seedless", action="store_true", help="accepted for compatibility; runs are deterministic")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("gsm", help="ground structure and force LP only")
    p.add_argument("spec")
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_gsm)

    p = sub.add_parser("subdivide", help="one subdivision level of a truss file")
    p.add_argument("truss")
    p.add_argument("spec")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_subdivide)

    p = sub.add_parser("check", help="stability count and equilibrium residuals")
    p.add_argument("truss")
    p.add_argument("spec")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="run the bundled fixtures")
    p.add_argument("--filter", default="")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    try:
        return args.func(args)
    except SpecFormatError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrussError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
