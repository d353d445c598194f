"""Minimum-volume member forces on a fixed geometry (plastic ground-structure LP)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .equilibrium import assemble_C
from .lp import LPOptions, LPProblem, LPStatus, solve_lp
from .model import FunctionalSpec, Truss, UnsupportableError


@dataclass(frozen=True)
class AlgAResult:
    force_densities: np.ndarray  # (m, K)
    areas: np.ndarray  # (m,)
    volume: float
    governing_case: np.ndarray  # (m,) zero-based
    lp_areas: np.ndarray  # area variables as the LP saw them
    iterations: int = 0
    basis: np.ndarray | None = None  # final LP basis, usable as a warm-start hint


def governing_cases(w: np.ndarray) -> np.ndarray:
    """Index of the case with largest |w| per bar; ties go to the lowest index."""
    if w.shape[1] == 1:
        return np.zeros(w.shape[0], dtype=int)
    a = np.abs(w)
    top = a.max(axis=1, keepdims=True)
    return np.argmax(a >= top - 1e-12 * np.maximum(top, 1e-300), axis=1)


def build_lp(truss: Truss, spec: FunctionalSpec) -> tuple[LPProblem, int]:
    """LP over per-case split densities w+ / w- and a per-bar excess ``tau``.

    Bar area is ``l * (|w^0| + tau) / sigma`` with ``|w^k| <= |w^0| + tau`` for
    every other case, so one formulation serves K = 1 and K > 1.
    """
    system = assemble_C(truss, spec)
    K = spec.load_cases
    m = len(truss.bars)
    R = system.n_rows
    l = truss.lengths
    cost_w = l * l / spec.sigma

    blocks = []
    rhs = []
    CT = system.CT.tocsc()
    # columns: [w+_0, w-_0, w+_1, w-_1, ..., tau]
    for k in range(K):
        row = [None] * (2 * K + 1)
        row[2 * k] = CT
        row[2 * k + 1] = -CT
        row[2 * K] = sp.csc_matrix((R, m))
        blocks.append(row)
        rhs.append(-system.loads[k])
    if K > 1:
        I = sp.identity(m, format="csc")
        for k in range(1, K):
            row = [None] * (2 * K + 1)
            row[0] = -I
            row[1] = -I
            row[2 * k] = I
            row[2 * k + 1] = I
            row[2 * K] = -I
            blocks.append(row)
            rhs.append(np.zeros(m))
    n_slack = m * (K - 1)
    A = sp.bmat(blocks, format="csc")
    if n_slack:
        S = sp.vstack([sp.csc_matrix((R * K, n_slack)), sp.identity(n_slack, format="csc")], format="csc")
        A = sp.hstack([A, S], format="csc")
    c = np.concatenate([cost_w, cost_w, np.zeros(2 * m * (K - 1)), cost_w, np.zeros(n_slack)])
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    return LPProblem.build(c, A, b), m


def solve_alg_a(
    truss: Truss, spec: FunctionalSpec, opts: LPOptions | None = None, basis: np.ndarray | None = None
) -> AlgAResult:
    K = spec.load_cases
    m = len(truss.bars)
    system = assemble_C(truss, spec)
    if m == 0:
        if system.n_rows and np.any(system.loads != 0):
            raise UnsupportableError("statically unsupportable: loads present but the truss has no bars")
        z = np.zeros(0)
        return AlgAResult(np.zeros((0, K)), z, 0.0, np.zeros(0, dtype=int), z)
    problem, _ = build_lp(truss, spec)
    sol = solve_lp(problem, opts, basis=basis)
    if sol.status is LPStatus.INFEASIBLE:
        raise UnsupportableError("statically unsupportable spec/topology: the equilibrium LP is infeasible")
    if sol.status is not LPStatus.OPTIMAL:
        raise RuntimeError(f"internal error: force LP finished with status {sol.status.value}")
    x = sol.x
    w = np.empty((m, K))
    for k in range(K):
        w[:, k] = x[2 * k * m : (2 * k + 1) * m] - x[(2 * k + 1) * m : (2 * k + 2) * m]
    tau = x[2 * K * m : 2 * K * m + m]
    l = truss.lengths
    areas = l * np.abs(w).max(axis=1) / spec.sigma
    lp_areas = l * (x[:m] + x[m : 2 * m] + tau) / spec.sigma
    return AlgAResult(
        force_densities=w,
        areas=areas,
        volume=float(np.dot(l, areas)),
        governing_case=governing_cases(w),
        lp_areas=lp_areas,
        iterations=sol.iterations,
        basis=sol.basis,
    )


def apply_result(truss: Truss, result: AlgAResult) -> Truss:
    bars = tuple(
        replace(b, area=float(a), force_densities=tuple(float(x) for x in w), governing_case=int(g))
        for b, a, w, g in zip(truss.bars, result.areas, result.force_densities, result.governing_case)
    )
    return truss.with_bars(bars)


def size_truss(truss: Truss, spec: FunctionalSpec, opts: LPOptions | None = None) -> tuple[Truss, AlgAResult]:
    """Solve for forces and write areas/densities back onto the bars."""
    result = solve_alg_a(truss, spec, opts)
    return apply_result(truss, result), result
