"""End-to-end driver: ground structure, coarse optimization, subdivision refinement."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import replace

import numpy as np

from .geomopt import ALPOptions, alternating_lp
from .gsm import size_truss
from .model import (
    Bar,
    FunctionalSpec,
    Joint,
    JointKind,
    OptimizationReport,
    PipelineParams,
    Truss,
    TrussError,
    total_volume,
    validate_spec,
)
from .stability import stabilize
from .subdivision import subdivide
from .topo_local import LocalPassConfig, apply_local_pass, light_pass

log = logging.getLogger(__name__)

# a clean-up step may cost at most this much volume
VOLUME_SLACK = 1e-6


def _grid_axis(lo: float, hi: float, n: int) -> np.ndarray:
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return np.array([lo])
    return np.linspace(lo, hi, n)


def _clear_pairs(points: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """All index pairs whose segment passes through no third point."""
    N = len(points)
    out = []
    for i in range(N - 1):
        D = points[i + 1 :] - points[i]  # (M, d)
        L2 = np.einsum("ij,ij->i", D, D)
        R = points - points[i]  # (N, d)
        t = (D @ R.T) / L2[:, None]  # (M, N)
        proj = t[:, :, None] * D[:, None, :]
        dist = np.linalg.norm(R[None, :, :] - proj, axis=2)
        L = np.sqrt(L2)[:, None]
        inner = (t * L > tol) & ((1.0 - t) * L > tol) & (dist < tol)
        blocked = inner.any(axis=1)
        out.extend((i, i + 1 + k) for k in np.flatnonzero(~blocked))
    return out


def init_truss(spec: FunctionalSpec, n: int | None = None) -> Truss:
    """Spec joints plus an ``n``-per-axis grid over their bounding box, densely connected."""
    problems = validate_spec(spec)
    if problems:
        raise TrussError("invalid specification: " + "; ".join(problems))
    n = n or spec.params.n or len(spec.joints)
    d = spec.dimension
    K = spec.load_cases
    P = np.array([j.position for j in spec.joints], dtype=float)
    lo, hi = P.min(axis=0), P.max(axis=0)
    scale = float(np.max(hi - lo)) or 1.0
    tol = 1e-9 * scale

    joints = list(spec.joints)
    next_id = max(j.id for j in joints) + 1
    if n > 1:
        axes = [_grid_axis(lo[a], hi[a], n) for a in range(d)]
        grid = np.array(list(itertools.product(*axes)), dtype=float)
        grid = spec.region.clamp(grid)
        kept = []
        for g in grid:
            if not spec.region.admits(g):
                continue
            if np.min(np.linalg.norm(P - g, axis=1)) <= tol:
                continue
            if kept and np.min(np.linalg.norm(np.array(kept) - g, axis=1)) <= tol:
                continue
            kept.append(g)
        if not kept and len(grid) and len(spec.joints) < 2:
            raise TrussError("grid fully swallowed by obstacles")
        zero = tuple((0.0,) * d for _ in range(K))
        for g in kept:
            joints.append(Joint(next_id, tuple(float(x) for x in g), JointKind.INTERMEDIATE, zero))
            next_id += 1

    pts = np.array([j.position for j in joints], dtype=float)
    bars = []
    for i, j in _clear_pairs(pts, tol):
        if spec.region.obstacles and spec.region.segment_hits_obstacle(pts[i], pts[j]):
            continue
        bars.append(Bar((joints[i].id, joints[j].id), 0.0, (0.0,) * K, 0))
    return Truss(tuple(joints), tuple(bars), d)


def _sized(truss: Truss, spec: FunctionalSpec) -> tuple[Truss, float] | None:
    """Re-solve forces; None when the topology cannot carry the loads."""
    try:
        truss, res = size_truss(truss, spec)
    except (TrussError, RuntimeError):
        return None
    return truss, res.volume


def _guarded_pass(truss: Truss, spec: FunctionalSpec, cfg: LocalPassConfig, light: bool = False):
    """Local pass that is rejected when it breaks feasibility or raises the volume.

    If pruning at ``eps1`` cuts a load path, the pass is retried removing only
    bars that carry (numerically) nothing.
    """
    V = total_volume(truss)
    for attempt in (cfg, replace(cfg, eps1=1e-9)):
        if light:
            cand, counts = light_pass(truss, attempt)
        else:
            cand, counts = apply_local_pass(truss, attempt, spec)
        if not any(v for k, v in counts.items() if k != "passes"):
            return truss, counts, False
        sized = _sized(cand, spec)
        if sized is not None and sized[1] <= V + VOLUME_SLACK:
            return sized[0], counts, True
        log.info("local pass rejected (volume %.9g -> %s)", V, None if sized is None else f"{sized[1]:.9g}")
    return truss, {}, False


def optimize_coarse(
    truss: Truss, spec: FunctionalSpec, params: PipelineParams | None = None, report: OptimizationReport | None = None
) -> tuple[Truss, OptimizationReport]:
    """Alternate geometry optimization and local clean-up until the clean-up stops changing anything."""
    params = params or spec.params
    report = report if report is not None else OptimizationReport()
    cfg = LocalPassConfig.for_spec(spec)
    alp = ALPOptions.from_params(params)
    for _ in range(params.p_max1):
        truss, _ = alternating_lp(truss, spec, alp, report)
        truss, counts, changed = _guarded_pass(truss, spec, cfg)
        report.count(counts)
        if not changed:
            break
    return truss, report


# subdivision variants, tried in order until one can carry the loads; curved
# edges can turn a quad net into a mechanism, and keeping the parent bars as
# candidates restores a load path
_VARIANTS = ({}, {"keep_chords": "all"}, {"curved": False})


def _refine_level(truss, spec, params, cfg, alp, report) -> Truss | None:
    V = total_volume(truss)
    sized = None
    for variant in _VARIANTS:
        finer = subdivide(truss, spec, **variant)
        if finer is truss:
            return None
        if len(finer.bars) > params.max_bars:
            log.info("subdivision %s skipped: %d bars", variant, len(finer.bars))
            continue
        cand = _sized(finer, spec)
        if cand is None:
            continue
        if sized is None or cand[1] < sized[1]:
            sized = cand
        # a variant that starts above the current volume is kept only as a fallback
        if cand[1] <= V + VOLUME_SLACK:
            sized = cand
            break
    if sized is None:
        return None
    finer, _ = alternating_lp(sized[0], spec, alp, report)
    finer, counts, _ = _guarded_pass(finer, spec, cfg, light=True)
    report.count(counts)
    if total_volume(finer) > V + VOLUME_SLACK:
        log.info("refinement rejected: %.9g > %.9g", total_volume(finer), V)
        return None
    return finer


def refine(
    truss: Truss, spec: FunctionalSpec, params: PipelineParams | None = None, report: OptimizationReport | None = None
) -> tuple[Truss, OptimizationReport]:
    """Subdivide, re-optimize and lightly clean up, ``p_max2`` times."""
    params = params or spec.params
    report = report if report is not None else OptimizationReport()
    cfg = LocalPassConfig.for_spec(spec)
    alp = ALPOptions.from_params(params)
    stuck = False
    for level in range(1, params.p_max2 + 1):
        t0 = time.perf_counter()
        if not stuck:
            finer = _refine_level(truss, spec, params, cfg, alp, report)
            if finer is None:
                stuck = True
            else:
                truss = finer
                report.count({"subdivide": 1})
        report.add_phase(f"level {level}", truss, time.perf_counter() - t0)
    return truss, report


def run_pipeline(spec: FunctionalSpec, params: PipelineParams | None = None) -> tuple[Truss, OptimizationReport]:
    params = params or spec.params
    report = OptimizationReport()
    t0 = time.perf_counter()
    truss = init_truss(spec, params.n)
    truss, _ = size_truss(truss, spec)
    report.add_phase("ground structure", truss, time.perf_counter() - t0)

    t0 = time.perf_counter()
    cfg = LocalPassConfig.for_spec(spec)
    truss, counts, _ = _guarded_pass(truss, spec, cfg)
    report.count(counts)
    truss, _ = optimize_coarse(truss, spec, params, report)
    report.add_phase("coarse", truss, time.perf_counter() - t0)

    truss, _ = refine(truss, spec, params, report)

    t0 = time.perf_counter()
    aux: set[tuple[int, int]] = set()
    a_min = params.eps1 * (float(truss.areas.mean()) if truss.bars else 1.0)
    if params.stabilize:
        before = {b.key for b in truss.bars}
        truss = stabilize(truss, spec, a_min)
        aux = {b.key for b in truss.bars} - before
    truss, _ = size_truss(truss, spec)
    if aux:
        truss = truss.with_bars(
            replace(b, area=max(b.area, a_min)) if b.key in aux else b for b in truss.bars
        )
    report.add_phase("final", truss, time.perf_counter() - t0)
    return truss, report
