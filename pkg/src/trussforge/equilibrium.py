"""Nodal equilibrium matrices.

Column ``i`` of ``C^T`` for a bar joining joints ``j`` and ``k`` holds
``p_k - p_j`` on the rows of ``j`` and ``p_j - p_k`` on the rows of ``k``;
support rows are dropped. ``B`` is the same with each column divided by the
bar length (direction cosines).

With this column rule ``C^T w = -f`` makes a positive density pull the two
end joints toward each other, i.e. ``w > 0`` is tension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import FunctionalSpec, JointKind, Truss


@dataclass(frozen=True)
class EquilibriumSystem:
    CT: sp.csr_matrix  # (free dofs) x (bars)
    free_dof_index: dict[tuple[int, int], int]  # (joint id, axis) -> row
    loads: np.ndarray  # (K, free dofs)

    @property
    def n_rows(self) -> int:
        return self.CT.shape[0]


def free_dof_index(truss: Truss) -> dict[tuple[int, int], int]:
    d = truss.dimension
    out: dict[tuple[int, int], int] = {}
    for j in truss.joints:
        if j.kind is not JointKind.SUPPORT:
            for a in range(d):
                out[(j.id, a)] = len(out)
    return out


def _joint_rows(truss: Truss) -> np.ndarray:
    """Row offset of each joint's first dof, or -1 for supports."""
    d = truss.dimension
    rows = np.full(len(truss.joints), -1, dtype=int)
    r = 0
    for k, j in enumerate(truss.joints):
        if j.kind is not JointKind.SUPPORT:
            rows[k] = r
            r += d
    return rows


def _column_triplets(truss: Truss, vectors: np.ndarray):
    """Triplets placing ``vectors[i]`` at the first end's rows and its negation at the second's."""
    d = truss.dimension
    rows0 = _joint_rows(truss)
    e = truss.edges
    r_list, c_list, v_list = [], [], []
    bars = np.arange(len(e))
    for end, sign in ((0, 1.0), (1, -1.0)):
        base = rows0[e[:, end]] if len(e) else np.zeros(0, dtype=int)
        keep = base >= 0
        for a in range(d):
            r_list.append(base[keep] + a)
            c_list.append(bars[keep])
            v_list.append(sign * vectors[keep, a])
    if not r_list:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    return np.concatenate(r_list), np.concatenate(c_list), np.concatenate(v_list)


def load_matrix(truss: Truss, spec: FunctionalSpec) -> np.ndarray:
    d = truss.dimension
    K = spec.load_cases
    rows0 = _joint_rows(truss)
    n_rows = int(np.sum(rows0 >= 0)) * d
    f = np.zeros((K, n_rows))
    for k, j in enumerate(truss.joints):
        if rows0[k] < 0 or not j.loads:
            continue
        for c in range(K):
            f[c, rows0[k] : rows0[k] + d] = j.loads[c]
    return f


def assemble_C(truss: Truss, spec: FunctionalSpec) -> EquilibriumSystem:
    if len(truss.bars) and np.any(truss.lengths <= 0.0):
        bad = truss.bars[int(np.argmin(truss.lengths))]
        raise ValueError(f"bar {bad.endpoints} has coincident endpoints")
    p, e = truss.positions, truss.edges
    diff = p[e[:, 1]] - p[e[:, 0]] if len(e) else np.zeros((0, truss.dimension))
    r, c, v = _column_triplets(truss, diff)
    idx = free_dof_index(truss)
    CT = sp.csr_matrix((v, (r, c)), shape=(len(idx), len(truss.bars)))
    return EquilibriumSystem(CT, idx, load_matrix(truss, spec))


def assemble_B(truss: Truss, spec: FunctionalSpec) -> sp.csr_matrix:
    """Direction-cosine form: ``B^T`` with unit columns; ``B^T (w*l) == C^T w``."""
    system = assemble_C(truss, spec)
    if not len(truss.bars):
        return system.CT
    return (system.CT @ sp.diags(1.0 / truss.lengths)).tocsr()


def delta_C_triplets(truss: Truss, w: np.ndarray, u_index: np.ndarray):
    """Triplets of the linear map ``u -> ΔC^T w``.

    ``u_index[k]`` is the first column of joint ``k``'s displacement variables
    (``-1`` when the joint does not move). Returns (rows, cols, vals).
    """
    d = truss.dimension
    rows0 = _joint_rows(truss)
    e = truss.edges
    rr, cc, vv = [], [], []
    for b in range(len(e)):
        wb = w[b]
        if wb == 0.0:
            continue
        j, k = e[b]
        # row block of j gets w (u_k - u_j); row block of k gets w (u_j - u_k)
        for row_joint, plus, minus in ((j, k, j), (k, j, k)):
            r0 = rows0[row_joint]
            if r0 < 0:
                continue
            for a in range(d):
                if u_index[plus] >= 0:
                    rr.append(r0 + a)
                    cc.append(u_index[plus] + a)
                    vv.append(wb)
                if u_index[minus] >= 0:
                    rr.append(r0 + a)
                    cc.append(u_index[minus] + a)
                    vv.append(-wb)
    return np.array(rr, dtype=int), np.array(cc, dtype=int), np.array(vv, dtype=float)
