"""Joint relocation LP and the alternating force/geometry driver.

Volume at fixed topology is ``V = sum_i l_i^2 max_k |w_i^k| / sigma``. The
relocation LP linearizes it in the joint displacements ``u`` and density
changes ``dw`` around the current design while keeping every load case in
(linearized) equilibrium.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from .equilibrium import _joint_rows, assemble_C, delta_C_triplets
from .gsm import AlgAResult, apply_result, solve_alg_a
from .lp import LPOptions, LPProblem, LPStatus, solve_lp
from .model import FunctionalSpec, JointKind, OptimizationReport, PipelineParams, Truss, TrussError

log = logging.getLogger(__name__)


class OracleUnavailable(RuntimeError):
    """The gradient-descent oracle did not converge; callers should skip, not fail."""


@dataclass(frozen=True)
class AlgBResult:
    u: np.ndarray  # (n_joints, d); zero rows for supports and loaded joints
    dw: np.ndarray  # (m, K)
    predicted_decrease: float
    delta: np.ndarray  # per-bar density bound used
    lam: float  # displacement bound used
    basis: np.ndarray | None = None


@dataclass(frozen=True)
class ALPOptions:
    n_max: int = 500
    s_max: int = 10
    delta_factor: float = 0.1
    lambda_factor: float = 0.1
    min_rel_improvement: float = 1e-7
    window: int = 5

    @classmethod
    def from_params(cls, params: PipelineParams) -> "ALPOptions":
        return cls(n_max=params.n_max, s_max=params.s_max, min_rel_improvement=params.min_rel_improvement)


def density_bounds(w_gov: np.ndarray, factor: float = 0.1) -> np.ndarray:
    """``factor * |w|`` per bar; zero-force bars borrow the median nonzero magnitude."""
    a = np.abs(w_gov)
    nz = a[a > 0]
    fill = factor * float(np.median(nz)) if nz.size else factor
    return np.where(a > 0, factor * a, fill)


def volume_at(truss: Truss, w: np.ndarray, sigma: float = 1.0) -> float:
    """Volume of ``truss`` carrying densities ``w`` (m, K) at its current geometry."""
    if not len(truss.bars):
        return 0.0
    l2 = truss.lengths**2
    return float(np.dot(l2, np.abs(w).max(axis=1)) / sigma)


def _movable_index(truss: Truss) -> tuple[np.ndarray, int]:
    """Displacement column offsets; -1 for fixed joints.

    Intermediate joints whose bars do not span all ``d`` directions (e.g. a
    straight two-bar chain) are held still: any finite move turns them into
    mechanisms that no force distribution can balance.
    """
    d = truss.dimension
    p, e = truss.positions, truss.edges
    dirs: list[list[np.ndarray]] = [[] for _ in truss.joints]
    for a, b in e:
        v = p[b] - p[a]
        dirs[a].append(v)
        dirs[b].append(v)
    idx = np.full(len(truss.joints), -1, dtype=int)
    n = 0
    for k, j in enumerate(truss.joints):
        if j.kind is not JointKind.INTERMEDIATE or len(dirs[k]) < d:
            continue
        V = np.array(dirs[k])
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        if np.linalg.matrix_rank(V, tol=1e-6) < d:
            continue
        idx[k] = n
        n += d
    return idx, n


def solve_alg_b(
    truss: Truss,
    spec: FunctionalSpec,
    w: np.ndarray | None = None,
    delta: np.ndarray | None = None,
    lam: float | None = None,
    lp_opts: LPOptions | None = None,
    basis: np.ndarray | None = None,
) -> AlgBResult:
    d = truss.dimension
    K = spec.load_cases
    m = len(truss.bars)
    w = truss.densities() if w is None else np.asarray(w, dtype=float).reshape(m, K)
    if m == 0:
        return AlgBResult(np.zeros((len(truss.joints), d)), np.zeros((0, K)), 0.0, np.zeros(0), 0.0)
    gov = np.array([b.governing_case for b in truss.bars], dtype=int)
    w_gov = w[np.arange(m), gov]
    sgn = np.sign(w_gov)
    l = truss.lengths
    p, e = truss.positions, truss.edges
    if delta is None:
        delta = density_bounds(w_gov)
    if lam is None:
        lam = 0.1 * float(l.mean())

    u_index, nu = _movable_index(truss)
    zero = np.flatnonzero(sgn == 0)
    nz = len(zero)
    system = assemble_C(truss, spec)
    R = system.n_rows
    CT = system.CT.tocsc()

    # K > 1 columns: [u | dw^0 .. dw^{K-1} | t (zero bars) | slacks (2K per zero bar)
    #                 | slacks (2 (K-1) per loaded bar)]
    # K = 1 columns: [u | dw | dw-]; zero-bar dw is split into two signs and
    # dw- is pinned at 0 elsewhere (a fixed layout keeps basis hints usable)
    split = K == 1
    loaded = np.flatnonzero(sgn != 0)
    n_cap = 0 if split else 2 * (K - 1) * len(loaded)
    n_extra = m if split else nz + 2 * K * nz + n_cap
    n_cols = nu + K * m + n_extra
    c = np.zeros(n_cols)
    chord = p[e[:, 1]] - p[e[:, 0]]
    coef = (2.0 * np.abs(w_gov))[:, None] * chord / spec.sigma
    for end, s in ((1, 1.0), (0, -1.0)):
        cols = u_index[e[:, end]]
        keep = cols >= 0
        for a in range(d):
            np.add.at(c, cols[keep] + a, s * coef[keep, a])
    c[nu + gov * m + np.arange(m)] += sgn * l * l / spec.sigma
    if split:
        c[nu + zero] = l[zero] ** 2 / spec.sigma
        c[nu + m + zero] = l[zero] ** 2 / spec.sigma
    else:
        c[nu + K * m : nu + K * m + nz] = l[zero] ** 2 / spec.sigma

    blocks = []
    for k in range(K):
        rr, cc, vv = delta_C_triplets(truss, w[:, k], u_index)
        dC = sp.csc_matrix((vv, (rr, cc)), shape=(R, nu))
        tail = -CT if split else sp.csc_matrix((R, n_extra))
        row = [dC] + [None] * K + [tail]
        row[1 + k] = CT
        for kk in range(K):
            if row[1 + kk] is None:
                row[1 + kk] = sp.csc_matrix((R, m))
        blocks.append(row)
    A = sp.bmat(blocks, format="csc") if blocks else sp.csc_matrix((0, n_cols))
    if nz and not split:
        # |dw^k_i| <= t_i for zero-force bars: +-dw - t + slack = 0
        rows, cols, vals = [], [], []
        r = 0
        for k in range(K):
            for s in (1.0, -1.0):
                for q, i in enumerate(zero):
                    rows += [r, r, r]
                    cols += [nu + k * m + i, nu + K * m + q, nu + K * m + nz + r]
                    vals += [s, -1.0, 1.0]
                    r += 1
        extra = sp.csc_matrix((vals, (rows, cols)), shape=(r, n_cols))
        A = sp.vstack([A, extra], format="csc")
    b = np.zeros(A.shape[0])
    if n_cap:
        # the governing case must stay the maximum to first order:
        # +-(w^k + dw^k) <= |w^g| + sgn dw^g for every other case k
        rows, cols, vals, rhs = [], [], [], []
        r = 0
        s0 = nu + K * m + nz + 2 * K * nz
        for i in loaded:
            g = gov[i]
            for k in range(K):
                if k == g:
                    continue
                for s in (1.0, -1.0):
                    rows += [r, r, r]
                    cols += [nu + k * m + i, nu + g * m + i, s0 + r]
                    vals += [s, -sgn[i], 1.0]
                    rhs.append(max(abs(w_gov[i]) - s * w[i, k], 0.0))
                    r += 1
        cap = sp.csc_matrix((vals, (rows, cols)), shape=(r, n_cols))
        A = sp.vstack([A, cap], format="csc")
        b = np.concatenate([b, rhs])

    lo = np.full(n_cols, 0.0)
    hi = np.full(n_cols, np.inf)
    bounds = spec.region.bounds
    for k, j in enumerate(truss.joints):
        if u_index[k] < 0:
            continue
        sl = slice(u_index[k], u_index[k] + d)
        lo[sl] = np.maximum(-lam, np.minimum(0.0, np.asarray(bounds.lo, float) - p[k]))
        hi[sl] = np.minimum(lam, np.maximum(0.0, np.asarray(bounds.hi, float) - p[k]))
    dl = np.tile(delta, K)
    lo[nu : nu + K * m] = -dl
    hi[nu : nu + K * m] = dl
    if split:
        lo[nu + zero] = 0.0
        hi[nu + m :] = 0.0
        hi[nu + m + zero] = delta[zero]

    sol = solve_lp(LPProblem.build(c, A, b, lo, hi), lp_opts, basis=basis)
    if sol.status is not LPStatus.OPTIMAL:
        raise RuntimeError(f"internal error: relocation LP finished with status {sol.status.value}")
    x = np.clip(sol.x, lo, hi)
    u = np.zeros((len(truss.joints), d))
    for k in range(len(truss.joints)):
        if u_index[k] >= 0:
            u[k] = x[u_index[k] : u_index[k] + d]
    dw = x[nu : nu + K * m].reshape(K, m).T.copy()
    if split:
        dw[:, 0] -= x[nu + m :]
    return AlgBResult(u, dw, float(-(c @ x)), delta, lam, sol.basis)


def _trial_ok(truss: Truss, spec: FunctionalSpec, moved: np.ndarray) -> bool:
    region = spec.region
    if region.obstacles:
        for k, j in enumerate(truss.joints):
            if j.kind is JointKind.INTERMEDIATE and not region.admits(truss.positions[k]):
                return False
        p, e = truss.positions, truss.edges
        for i in np.flatnonzero(moved[e[:, 0]] | moved[e[:, 1]]):
            if region.segment_hits_obstacle(p[e[i, 0]], p[e[i, 1]]):
                return False
    return bool(np.all(truss.lengths > 1e-12 * max(1.0, float(np.max(np.abs(truss.positions))))))


def alternating_lp(
    truss: Truss,
    spec: FunctionalSpec,
    opts: ALPOptions | None = None,
    report: OptimizationReport | None = None,
    lp_opts: LPOptions | None = None,
    on_accept: Callable[[Truss], None] | None = None,
) -> tuple[Truss, OptimizationReport]:
    """Alternate the force LP and the relocation LP with a halving line search.

    Returns the best truss (areas and densities populated) and a report whose
    ``alp_volumes`` holds the strictly decreasing accepted volumes.
    ``on_accept`` sees every accepted iterate, the starting design included.
    """
    opts = opts or ALPOptions()
    report = report if report is not None else OptimizationReport()
    res = solve_alg_a(truss, spec, lp_opts)
    truss = apply_result(truss, res)
    V = res.volume
    report.alp_volumes.append(V)
    if on_accept is not None:
        on_accept(truss)
    if not truss.bars:
        return truss, report
    movable = np.array([j.kind is JointKind.INTERMEDIATE for j in truss.joints])
    if not movable.any():
        return truss, report

    b_basis = None
    j0 = 0
    history = [V]
    for it in range(opts.n_max):
        lam = opts.lambda_factor * float(truss.lengths.mean())
        delta = density_bounds(truss.governing_densities(), opts.delta_factor)
        try:
            step = solve_alg_b(truss, spec, res.force_densities, delta, lam, lp_opts, b_basis)
        except RuntimeError as exc:
            log.warning("alternating_lp stopped: %s", exc)
            break
        b_basis = step.basis
        if not np.any(step.u):
            break
        accepted: tuple[Truss, AlgAResult] | None = None
        for j in range(j0, opts.s_max + 1):
            s = 2.0**-j
            p_hat = spec.region.clamp(truss.positions + s * step.u)
            trial = truss.with_positions(p_hat)
            if not _trial_ok(trial, spec, movable):
                continue
            try:
                r_hat = solve_alg_a(trial, spec, lp_opts, res.basis)
            except (TrussError, ValueError, RuntimeError):
                continue
            if r_hat.volume < V:
                accepted = (trial, r_hat)
                # the next search starts one halving above this step
                j0 = max(j - 1, 0)
                break
        if accepted is None:
            break
        trial, res = accepted
        truss = apply_result(trial, res)
        V = res.volume
        history.append(V)
        report.alp_volumes.append(V)
        if on_accept is not None:
            on_accept(truss)
        # stop on a stall over the last few steps, not on one short step
        w = min(opts.window, len(history) - 1)
        if history[-1 - w] - V < w * opts.min_rel_improvement * V:
            break
    log.debug("alternating_lp: %d accepted steps, V=%.6f", len(report.alp_volumes) - 1, V)
    return truss, report


# -- gradient-descent penalty oracle ---------------------------------------


@dataclass(frozen=True)
class GDOptions:
    lambda_volume: float = 1.0
    lambda_static: float = 100.0
    max_iters: int = 20000
    grad_tol: float = 1e-7
    rel_tol: float = 1e-12
    max_free_dofs: int = 50


def gd_volume_oracle(truss: Truss, spec: FunctionalSpec, opts: GDOptions | None = None) -> float:
    """Penalty descent (L-BFGS-B) over positions and square-root densities.

    The final geometry is re-sized by the force LP and that volume is returned.
    Raises OracleUnavailable when descent stalls without converging.
    """
    opts = opts or GDOptions()
    if spec.load_cases != 1:
        raise ValueError("the gradient-descent oracle handles a single load case")
    d = truss.dimension
    movable = np.array([j.kind is JointKind.INTERMEDIATE for j in truss.joints])
    if movable.sum() * d > opts.max_free_dofs:
        raise ValueError("instance too large for the gradient-descent oracle")
    if not truss.bars:
        return solve_alg_a(truss, spec).volume

    res = solve_alg_a(truss, spec)
    w0 = res.force_densities[:, 0]
    scale = float(np.max(np.abs(w0), initial=0.0)) or 1.0
    rp = np.sqrt(np.maximum(w0, 0.0) + 1e-3 * scale)
    rm = np.sqrt(np.maximum(-w0, 0.0) + 1e-3 * scale)
    P = truss.positions.copy()
    e = truss.edges
    rows0 = _joint_rows(truss)
    free = rows0 >= 0
    f = np.zeros((len(truss.joints), d))
    f[free] = assemble_C(truss, spec).loads[0].reshape(-1, d)
    l1, l2 = opts.lambda_volume, opts.lambda_static

    def energy(P, rp, rm):
        D = P[e[:, 1]] - P[e[:, 0]]
        L2 = np.einsum("ij,ij->i", D, D)
        w = rp * rp - rm * rm
        r = np.zeros_like(P)
        np.add.at(r, e[:, 0], w[:, None] * D)
        np.add.at(r, e[:, 1], -w[:, None] * D)
        r = (r + f) * free[:, None]
        E = l1 * np.dot(L2, rp * rp + rm * rm) + l2 * float(np.sum(r * r))
        return E, D, L2, w, r

    def gradient(P, rp, rm):
        E, D, L2, w, r = energy(P, rp, rm)
        g = 2.0 * r
        # d/dw of the penalty for bar (j, k): D . (g_j - g_k)
        dEdw = l2 * np.einsum("ij,ij->i", D, g[e[:, 0]] - g[e[:, 1]])
        grp = 2.0 * rp * (l1 * L2 + dEdw)
        grm = 2.0 * rm * (l1 * L2 - dEdw)
        a = rp * rp + rm * rm
        gP = np.zeros_like(P)
        gd = (2.0 * l1 * a)[:, None] * D + l2 * w[:, None] * (g[e[:, 0]] - g[e[:, 1]])
        np.add.at(gP, e[:, 1], gd)
        np.add.at(gP, e[:, 0], -gd)
        gP[~movable] = 0.0
        return E, gP, grp, grm

    # quasi-Newton descent over (movable coordinates, rp, rm); positions boxed by the region
    mv = np.flatnonzero(movable)
    nP, m = mv.size * d, len(e)
    b = spec.region.bounds
    box = [(lo, hi) for _ in mv for lo, hi in zip((None if np.isinf(x) else x for x in b.lo), (None if np.isinf(x) else x for x in b.hi))]
    box += [(None, None)] * (2 * m)

    def unpack(z):
        Q = P.copy()
        Q[mv] = z[:nP].reshape(-1, d)
        return Q, z[nP : nP + m], z[nP + m :]

    def fun(z):
        E, gP, grp, grm = gradient(*unpack(z))
        return E, np.concatenate([gP[mv].ravel(), grp, grm])

    z0 = np.concatenate([P[mv].ravel(), rp, rm])
    out = minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=box,
                   options={"maxiter": opts.max_iters, "gtol": opts.grad_tol, "ftol": opts.rel_tol})
    if not out.success:
        raise OracleUnavailable(f"descent did not converge: {out.message}")
    P = unpack(out.x)[0]
    final = truss.with_positions(P)
    if not _trial_ok(final, spec, movable):
        raise OracleUnavailable("gradient descent left the admissible region")
    try:
        return solve_alg_a(final, spec).volume
    except TrussError as exc:
        raise OracleUnavailable(f"descent ended on an unsupportable geometry: {exc}") from None
