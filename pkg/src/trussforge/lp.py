"""Bounded-variable linear programming.

Problems are stated as::

    minimize    c @ x
    subject to  A @ x == b
                lo <= x <= hi      (entries of lo/hi may be infinite)

The default backend is a primal revised simplex method working directly with
variable bounds, a sparse LU factorization of the basis (refactorized every
``refactor_every`` pivots, product-form eta updates in between) and Dantzig
pricing that falls back to Bland's rule while the objective stalls.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LPProblem:
    """Equality-form LP with variable bounds.

    ``A`` is given as row-major triplets ``(rows, cols, vals)`` or as any
    scipy sparse matrix / dense array.
    """

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def build(cls, c, A, b, lo=None, hi=None, shape=None) -> "LPProblem":
        c = np.asarray(c, dtype=float)
        n = c.shape[0]
        b = np.asarray(b, dtype=float).reshape(-1)
        if isinstance(A, tuple):
            rows, cols, vals = A
            A = sp.coo_matrix((vals, (rows, cols)), shape=shape or (b.shape[0], n))
        A = sp.csc_matrix(A, dtype=float)
        lo = np.zeros(n) if lo is None else np.broadcast_to(np.asarray(lo, float), (n,)).copy()
        hi = np.full(n, np.inf) if hi is None else np.broadcast_to(np.asarray(hi, float), (n,)).copy()
        prob = cls(c=c, A=A, b=b, lo=lo, hi=hi)
        prob.check()
        return prob

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def check(self) -> None:
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError(f"dimension mismatch: A is {m}x{n}, c has {self.c.shape}, b has {self.b.shape}")
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError("bounds must have one entry per column")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(np.isposinf(self.lo)) or np.any(np.isneginf(self.hi)):
            raise ValueError("lower bound +inf or upper bound -inf")


@dataclass(frozen=True)
class Basis:
    """Final basis of a solve: basic columns plus which nonbasic columns sit at their upper bound."""

    cols: np.ndarray
    at_upper: np.ndarray

    def __len__(self) -> int:
        return len(self.cols)


@dataclass
class LPSolution:
    status: LPStatus
    x: np.ndarray
    objective_value: float
    iterations: int
    duals: np.ndarray | None = None
    basis: Basis | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


@dataclass(frozen=True)
class LPOptions:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    max_iters: int | None = None  # default 50 * (rows + cols)
    refactor_every: int | None = None  # default min(100, max(20, rows // 10))
    stall_limit: int | None = None  # default max(200, 2 * rows)
    pivot_tol: float = 1e-9
    perturb: float = 1e-7


class LPBackend(Protocol):
    def solve(self, problem: LPProblem, options: LPOptions, basis: np.ndarray | None = None) -> LPSolution: ...


class _Basis:
    """Sparse LU of the basis matrix plus a product-form eta file."""

    def __init__(self, A: sp.csc_matrix, cols: np.ndarray):
        self.A = A
        self.cols = cols
        self.factor()

    def factor(self) -> None:
        B = self.A[:, self.cols].tocsc()
        self.lu = spla.splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = self.lu.solve(a)
        for r, alpha in self.etas:
            xr = x[r] / alpha[r]
            x -= alpha * xr
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        y = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            yr = y[r]
            y[r] = 0.0
            y[r] = (yr - alpha @ y) / alpha[r]
        return self.lu.solve(y, trans="T")

    def replace(self, r: int, col: int, alpha: np.ndarray) -> None:
        self.cols[r] = col
        self.etas.append((r, alpha.copy()))


def _well_conditioned(B: sp.csc_matrix, max_dense: int = 1200) -> bool:
    """Cheap screen for a singular hint basis (SuperLU is noisy when it fails)."""
    if csgraph.structural_rank(B.tocsr()) < B.shape[0]:
        return False
    if B.shape[0] > max_dense:
        return True
    sv = np.linalg.svd(B.toarray(), compute_uv=False)
    return bool(sv[-1] > 1e-11 * sv[0])


class SimplexBackend:
    """In-repo primal revised simplex (the default)."""

    def solve(self, problem: LPProblem, options: LPOptions | None = None, basis=None) -> LPSolution:
        return _Simplex(problem, options or LPOptions(), basis).run()


class _Simplex:
    # nonbasic state codes
    AT_LO, AT_HI, FREE_ZERO, BASIC = 0, 1, 2, 3

    def __init__(self, problem: LPProblem, opts: LPOptions, hint: Basis | np.ndarray | None = None):
        self.p = problem
        self.o = opts
        m, n = problem.A.shape
        self.m, self.n = m, n
        self.max_iters = opts.max_iters if opts.max_iters is not None else 50 * (m + n)
        self.stall_limit = opts.stall_limit if opts.stall_limit is not None else max(200, 2 * m)
        self.refactor_every = opts.refactor_every or min(100, max(20, m // 10))

        # widen finite bounds by a small deterministic random amount to break
        # degeneracy; the exact bounds are restored before phase 2 finishes
        rng = np.random.default_rng(12345)
        lo, hi = problem.lo.copy(), problem.hi.copy()
        span = hi > lo
        for bnd, sgn in ((lo, -1.0), (hi, 1.0)):
            fin = span & np.isfinite(bnd)
            bnd[fin] += sgn * opts.perturb * rng.uniform(0.5, 1.0, int(fin.sum())) * (1.0 + np.abs(bnd[fin]))
        # nonbasic start at the bound the objective prefers
        at_hi = np.isfinite(hi) & ((problem.c < 0) | ~np.isfinite(lo))
        x = np.where(at_hi, hi, np.where(np.isfinite(lo), lo, 0.0))
        state = np.where(at_hi, self.AT_HI, np.where(np.isfinite(lo), self.AT_LO, self.FREE_ZERO))

        self.b = problem.b
        # one artificial per row, signed so it starts nonnegative
        resid = self.b - problem.A @ x
        sign = np.where(resid >= 0, 1.0, -1.0)
        art = sp.csc_matrix((sign, (np.arange(m), np.arange(m))), shape=(m, m))
        self.A = sp.hstack([problem.A, art], format="csc")
        self.A.sort_indices()
        self.lo = np.concatenate([lo, np.zeros(m)])
        self.hi = np.concatenate([hi, np.full(m, np.inf)])
        # judged on the original bounds: shifted working bounds never unpin a fixed column
        self.movable = np.concatenate([problem.lo < problem.hi, np.ones(m, dtype=bool)])
        self.iterations = 0
        self.scale_b = max(1.0, float(np.max(np.abs(problem.b), initial=0.0)))
        signs = self.A.data.copy()
        hx, hstate = x, state
        if isinstance(hint, Basis):
            if hint.at_upper.shape == (n,):
                # nonbasic columns restart where the hinted solve left them
                flip = hint.at_upper & np.isfinite(hi)
                fin_lo = np.isfinite(lo)
                hx = np.where(flip, hi, np.where(fin_lo, lo, x))
                hstate = np.where(flip, self.AT_HI, np.where(fin_lo, self.AT_LO, state))
            hint = hint.cols
        if hint is None or not self._warm_start(np.asarray(hint, dtype=int), hx, hstate):
            self.A.data[:] = signs  # a failed warm start may have flipped artificials
            self.x = np.concatenate([x, np.abs(resid)])
            self.state = np.concatenate([state, np.full(m, self.BASIC)])
            self.basis = _Basis(self.A, np.arange(n, n + m))
        self.AT = self.A.T.tocsr()

    def _refactor(self) -> None:
        """Refactor; a singular basis is repaired by swapping dependent columns for artificials."""
        try:
            self.basis.factor()
            return
        except RuntimeError:
            if self.m > 4000:
                raise
        cols = self.basis.cols
        B = self.A[:, cols].toarray()
        _, R, piv = sla.qr(B, pivoting=True, mode="economic")
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-9 * max(diag[0], 1e-300)))
        keep = np.sort(piv[:rank])
        # rows left uncovered by the independent columns get their artificial back
        _, _, rpiv = sla.qr(B[:, keep].T, pivoting=True, mode="economic")
        free_rows = np.sort(rpiv[rank:])
        drop = np.setdiff1d(np.arange(self.m), keep)
        for r, row in zip(drop, free_rows):
            out = cols[r]
            lo, hi = self.lo[out], self.hi[out]
            if np.isfinite(lo):
                self.state[out], self.x[out] = self.AT_LO, lo
            elif np.isfinite(hi):
                self.state[out], self.x[out] = self.AT_HI, hi
            else:
                self.state[out], self.x[out] = self.FREE_ZERO, 0.0
            cols[r] = self.n + row
            self.state[cols[r]] = self.BASIC
        self.basis.factor()

    def _col(self, q: int) -> np.ndarray:
        A = self.A
        v = np.zeros(self.m)
        sl = slice(A.indptr[q], A.indptr[q + 1])
        v[A.indices[sl]] = A.data[sl]
        return v

    def _warm_start(self, cols: np.ndarray, x: np.ndarray, state: np.ndarray) -> bool:
        """Start from a hinted basis, trading infeasible basics for artificials."""
        n, m = self.n, self.m
        if cols.shape != (m,) or cols.min(initial=0) < 0 or cols.max(initial=0) >= n + m:
            return False
        if len(np.unique(cols)) != m:
            return False
        self.x = np.concatenate([x, np.zeros(m)])
        self.state = np.concatenate([state, np.full(m, self.AT_LO)])
        self.state[cols] = self.BASIC
        self.x[cols] = 0.0
        if not _well_conditioned(self.A[:, cols]):
            return False
        try:
            self.basis = _Basis(self.A, cols.copy())
        except RuntimeError:
            return False
        tol = self.o.feas_tol * self.scale_b
        for _ in range(m + 1):
            self._recompute_basics()
            bc = self.basis.cols
            xb = self.x[bc]
            neg_art = np.flatnonzero((bc >= n) & (xb < 0))
            if len(neg_art):
                for r in neg_art:
                    q = bc[r]
                    self.A.data[self.A.indptr[q]] *= -1.0
                    self.x[q] = -xb[r]
                self._refactor()
                continue
            below = self.lo[bc] - xb
            above = xb - self.hi[bc]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= tol:
                return True
            e = np.zeros(m)
            e[r] = 1.0
            rho = self.basis.btran(e)
            free_art = np.ones(m, dtype=bool)
            free_art[bc[bc >= n] - n] = False
            score = np.where(free_art, np.abs(rho), 0.0)
            k = int(np.argmax(score))
            if score[k] <= 1e-9 * max(1.0, float(np.max(np.abs(rho)))):
                return False
            out = bc[r]
            to_hi = above[r] > below[r]
            self.state[out] = self.AT_HI if to_hi else self.AT_LO
            self.x[out] = self.hi[out] if to_hi else self.lo[out]
            self.state[n + k] = self.BASIC
            alpha = self.basis.ftran(self._col(n + k))
            if abs(alpha[r]) <= 1e-9:
                return False
            self.basis.replace(r, n + k, alpha)
            if len(self.basis.etas) >= self.refactor_every:
                try:
                    self._refactor()
                except RuntimeError:
                    return False
        return False

    # -- helpers -------------------------------------------------------
    def _recompute_basics(self) -> None:
        cols = self.basis.cols
        nonbasic = np.ones(self.A.shape[1], dtype=bool)
        nonbasic[cols] = False
        xn = np.where(nonbasic, self.x, 0.0)
        self.x[cols] = self.basis.ftran(self.b - self.A @ xn)

    def _iterate(self, cost: np.ndarray) -> LPStatus | None:
        """Run simplex pivots for ``cost``; returns a terminal status or None on optimality.

        Devex pricing; reduced costs are updated from the pivot row and
        recomputed from scratch at every refactorization.
        """
        o = self.o
        stall = 0
        use_bland = False
        best = np.inf
        movable = self.movable
        weights = np.ones(self.A.shape[1])
        d = None
        fresh_d = False
        while True:
            if self.iterations >= self.max_iters:
                return LPStatus.ITERATION_LIMIT
            cols = self.basis.cols
            if d is None or (use_bland and not fresh_d):
                y = self.basis.btran(cost[cols])
                d = cost - self.AT @ y
                d[cols] = 0.0
                fresh_d = True
            st = self.state
            can_up = ((st == self.AT_LO) | (st == self.FREE_ZERO)) & movable
            can_dn = ((st == self.AT_HI) | (st == self.FREE_ZERO)) & movable
            cand = np.zeros_like(d)
            up = can_up & (d < -o.opt_tol)
            cand[up] = -d[up]
            dn = can_dn & (d > o.opt_tol)
            cand[dn] = np.maximum(cand[dn], d[dn])
            if not np.any(cand > 0):
                # confirm with fresh duals before declaring optimality
                y = self.basis.btran(cost[cols])
                fresh = cost - self.AT @ y
                fresh[cols] = 0.0
                if np.max(np.abs(fresh - d), initial=0.0) > o.opt_tol:
                    d, fresh_d = fresh, True
                    continue
                self.y = y
                self.d = fresh
                return None
            if use_bland:
                q = int(np.flatnonzero(cand > 0)[0])
            else:
                q = int(np.argmax(cand * cand / weights))
            direction = 1.0 if (d[q] < 0 and can_up[q]) else -1.0

            alpha = self.basis.ftran(self._col(q))
            # basic x changes by -direction * theta * alpha
            delta = -direction * alpha
            xb = self.x[cols]
            theta, leave, leave_to_hi = self._ratio_test(xb, delta, cols, use_bland)
            span = self.hi[q] - self.lo[q]
            if span <= theta:
                theta, leave = span, -1
            if not np.isfinite(theta):
                if not fresh_d:
                    d = None
                    continue
                return LPStatus.UNBOUNDED

            self.iterations += 1
            self.x[cols] = xb + theta * delta
            self.x[q] += direction * theta
            fresh_d = False
            if leave < 0:
                # bound flip, basis unchanged
                self.state[q] = self.AT_HI if direction > 0 else self.AT_LO
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
            else:
                out = cols[leave]
                e = np.zeros(self.m)
                e[leave] = 1.0
                row = self.AT @ self.basis.btran(e)
                piv = alpha[leave]
                ratio = row / piv
                dq, wq = d[q], weights[q]
                d -= dq * ratio
                weights = np.maximum(weights, ratio * ratio * wq)
                d[q] = 0.0
                d[out] = -dq / piv
                weights[out] = max(wq / (piv * piv), 1.0)
                self.state[out] = self.AT_HI if leave_to_hi else self.AT_LO
                # a Harris step may overshoot by up to feas_tol; shift the working
                # bound instead of snapping, which would break B x_B = b - N x_N
                val = self.x[out]
                if leave_to_hi:
                    self.hi[out] = max(self.hi[out], val)
                    self.x[out] = self.hi[out]
                else:
                    self.lo[out] = min(self.lo[out], val)
                    self.x[out] = self.lo[out]
                if not np.isfinite(self.x[out]):
                    self.state[out] = self.FREE_ZERO
                    self.x[out] = 0.0
                self.state[q] = self.BASIC
                self.basis.replace(leave, q, alpha)
                if len(self.basis.etas) >= self.refactor_every:
                    self._refactor()
                    self._recompute_basics()
                    d = None
                if weights.max() > 1e6:
                    weights[:] = 1.0

            obj = float(cost @ self.x)
            if obj < best - 1e-12 * max(1.0, abs(best) if np.isfinite(best) else 1.0):
                best = obj
                stall = 0
                use_bland = False
            else:
                stall += 1
                if stall >= self.stall_limit:
                    use_bland = True

    def _ratio_test(self, xb, delta, cols, use_bland):
        """Harris two-pass ratio test; returns (step, leaving row or -1, leaves at upper)."""
        o = self.o
        lob, hib = self.lo[cols], self.hi[cols]
        amax = float(np.max(np.abs(delta), initial=0.0))
        big = np.abs(delta) > max(o.pivot_tol, 1e-9 * amax)
        dec = big & (delta < 0) & np.isfinite(lob)
        inc = big & (delta > 0) & np.isfinite(hib)
        if not (dec.any() or inc.any()):
            return np.inf, -1, False
        raw = np.full(self.m, np.inf)
        raw[dec] = xb[dec] - lob[dec]
        raw[inc] = hib[inc] - xb[inc]
        slack = np.maximum(raw, 0.0)
        rate = np.abs(delta)
        relaxed = np.full(self.m, np.inf)
        blocking = dec | inc
        # an already violated basic may not drift further out
        relaxed[blocking] = np.maximum(raw[blocking] + o.feas_tol, 0.0) / rate[blocking]
        bound = float(np.min(relaxed))
        ties = np.flatnonzero(blocking & (slack / np.where(blocking, rate, 1.0) <= bound))
        if use_bland:
            # smallest index among the reasonably sized pivots
            ties = ties[rate[ties] >= 1e-2 * rate[ties].max()]
            r = int(ties[np.argmin(cols[ties])])
        else:
            r = int(ties[np.argmax(rate[ties])])
        return float(slack[r] / rate[r]), r, bool(inc[r])

    # -- driver --------------------------------------------------------
    def _dual_cleanup(self) -> LPStatus | None:
        """Dual simplex pivots until the (dual feasible) basis is primal feasible."""
        o = self.o
        movable = self.movable
        while True:
            if self.iterations >= self.max_iters:
                return LPStatus.ITERATION_LIMIT
            cols = self.basis.cols
            xb = self.x[cols]
            below = self.lo[cols] - xb
            above = xb - self.hi[cols]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= o.feas_tol * self.scale_b:
                return None
            raise_r = below[r] > above[r]
            e = np.zeros(self.m)
            e[r] = 1.0
            row = self.AT @ self.basis.btran(e)
            y = self.basis.btran(self._cost[cols])
            d = self._cost - self.AT @ y
            st = self.state
            up = ((st == self.AT_LO) | (st == self.FREE_ZERO)) & movable
            dn = ((st == self.AT_HI) | (st == self.FREE_ZERO)) & movable
            tol = max(o.pivot_tol, 1e-9 * float(np.max(np.abs(row), initial=0.0)))
            # x_r moves by -row_j * t when nonbasic j moves by t
            s = 1.0 if raise_r else -1.0
            elig_up = up & (s * row < -tol)
            elig_dn = dn & (s * row > tol)
            elig = elig_up | elig_dn
            if not elig.any():
                # only a genuinely infeasible problem can get stuck far from its bounds
                return None if viol[r] <= 1e3 * o.feas_tol * self.scale_b else LPStatus.INFEASIBLE
            ratio = np.full(len(d), np.inf)
            ratio[elig] = np.abs(d[elig]) / np.abs(row[elig])
            q = int(np.argmin(ratio))
            alpha = self.basis.ftran(self._col(q))
            target = self.lo[cols[r]] if raise_r else self.hi[cols[r]]
            t = (xb[r] - target) / alpha[r]
            self.iterations += 1
            self.x[cols] = xb - alpha * t
            self.x[q] += t
            out = cols[r]
            self.x[out] = target
            self.state[out] = self.AT_LO if raise_r else self.AT_HI
            self.state[q] = self.BASIC
            self.basis.replace(r, q, alpha)
            if len(self.basis.etas) >= self.refactor_every:
                self._refactor()
                self._recompute_basics()

    def _restore_bounds(self) -> LPStatus | None:
        n = self.n
        self.lo[:n], self.hi[:n] = self.p.lo, self.p.hi
        self.lo[n:], self.hi[n:] = 0.0, 0.0
        st = self.state
        nb = st != self.BASIC
        self.x[nb & (st == self.AT_LO)] = self.lo[nb & (st == self.AT_LO)]
        self.x[nb & (st == self.AT_HI)] = self.hi[nb & (st == self.AT_HI)]
        self._refactor()
        self._recompute_basics()
        status = self._dual_cleanup()
        if status is not None:
            return status
        # tolerance slack in the dual pivots can leave a few reduced costs off
        status = self._iterate(self._cost)
        if status is not None:
            return status
        self._refactor()
        self._recompute_basics()
        return None

    def run(self) -> LPSolution:
        n, m = self.n, self.m
        self._cost = np.concatenate([np.zeros(n), np.ones(m)])
        if float(np.sum(self.x[n:])) > self.o.feas_tol * self.scale_b:
            status = self._iterate(self._cost)
            if status is not None:
                return self._result(status)
        self._refactor()
        self._recompute_basics()
        infeas = float(np.sum(self.x[n:]))
        if infeas > self.o.feas_tol * self.scale_b:
            return self._result(LPStatus.INFEASIBLE)

        # artificials are pinned to zero for phase 2 (they may stay basic)
        self.hi[n:] = 0.0
        self.movable[n:] = False
        self.x[n:][self.state[n:] != self.BASIC] = 0.0
        self._recompute_basics()
        self._cost = np.concatenate([self.p.c, np.zeros(m)])
        status = self._iterate(self._cost)
        if status is None:
            status = self._restore_bounds()
        if status is not None:
            return self._result(status)
        return self._result(LPStatus.OPTIMAL)

    def _result(self, status: LPStatus) -> LPSolution:
        x = self.x[: self.n].copy()
        if status is LPStatus.OPTIMAL:
            # snap nonbasic values exactly onto their bounds
            x = np.clip(x, self.p.lo, self.p.hi)
        return LPSolution(
            status=status,
            x=x,
            objective_value=float(self.p.c @ x) if status is LPStatus.OPTIMAL else float("nan"),
            iterations=self.iterations,
            duals=getattr(self, "y", None) if status is LPStatus.OPTIMAL else None,
            basis=Basis(self.basis.cols.copy(), self.state[: self.n] == self.AT_HI),
        )


class ScipyHighsBackend:
    """Optional external engine behind the same contract (scipy's HiGHS)."""

    def solve(self, problem: LPProblem, options: LPOptions | None = None, basis=None) -> LPSolution:
        from scipy.optimize import linprog

        bounds = [(None if np.isneginf(l) else l, None if np.isposinf(h) else h) for l, h in zip(problem.lo, problem.hi)]
        res = linprog(problem.c, A_eq=problem.A, b_eq=problem.b, bounds=bounds, method="highs")
        status = {0: LPStatus.OPTIMAL, 1: LPStatus.ITERATION_LIMIT, 2: LPStatus.INFEASIBLE, 3: LPStatus.UNBOUNDED}.get(
            res.status, LPStatus.INFEASIBLE
        )
        x = res.x if res.x is not None else np.full(problem.n_cols, np.nan)
        duals = None
        if status is LPStatus.OPTIMAL and res.eqlin is not None:
            duals = np.asarray(res.eqlin.marginals)
        return LPSolution(status, x, float(res.fun) if res.fun is not None else float("nan"), int(res.nit), duals)


_default_backend: LPBackend = SimplexBackend()


def set_default_backend(backend: LPBackend) -> None:
    global _default_backend
    _default_backend = backend


def solve_lp(
    problem: LPProblem,
    opts: LPOptions | None = None,
    backend: LPBackend | None = None,
    basis: np.ndarray | None = None,
) -> LPSolution:
    """Solve ``problem``; ``basis`` is an optional starting-basis hint (ignored if unusable).

    A hinted run that does not end in a verified optimum is repeated from a
    cold start, so a hint can only change speed, not the outcome.
    """
    engine = backend or _default_backend
    opts = opts or LPOptions()
    sol = engine.solve(problem, opts, basis)
    if basis is None or _trusted(problem, sol, opts):
        return sol
    cold = engine.solve(problem, opts, None)
    cold.iterations += sol.iterations
    return cold


def _trusted(problem: LPProblem, sol: LPSolution, opts: LPOptions) -> bool:
    if sol.status is not LPStatus.OPTIMAL:
        return False
    scale = max(1.0, float(np.max(np.abs(problem.b), initial=0.0)))
    return primal_residual(problem, sol.x) <= 1e3 * opts.feas_tol * scale


def primal_residual(problem: LPProblem, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    r = problem.A @ x - problem.b
    viol = np.maximum(problem.lo - x, 0.0) + np.maximum(x - problem.hi, 0.0)
    return float(max(np.max(np.abs(r), initial=0.0), np.max(viol, initial=0.0)))
