"""Global refinement: tension/compression field, Bezier edge midpoints, cell subdivision."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .model import Bar, FunctionalSpec, Joint, JointKind, Truss


@dataclass
class TCField:
    tension: dict[int, np.ndarray] = field(default_factory=dict)
    compression: dict[int, np.ndarray] = field(default_factory=dict)

    def orthogonality(self, joints=None) -> float:
        """Mean |t . c| over joints carrying both directions (nan if none)."""
        ids = [j for j in (joints if joints is not None else self.tension) if j in self.tension and j in self.compression]
        if not ids:
            return float("nan")
        return float(np.mean([abs(self.tension[j] @ self.compression[j]) for j in ids]))


class CellKind(enum.Enum):
    TRIANGLE = 3
    QUAD = 4


@dataclass(frozen=True)
class Cell:
    kind: CellKind
    joints: tuple[int, ...]  # cyclic order
    signs: tuple[int, ...]  # sign of edge (joints[k], joints[k+1]); +1 tension, -1 compression

    @property
    def edges(self) -> list[tuple[int, int]]:
        n = len(self.joints)
        return [tuple(sorted((self.joints[k], self.joints[(k + 1) % n]))) for k in range(n)]


def _unit(v: np.ndarray) -> np.ndarray | None:
    n = float(np.linalg.norm(v))
    return v / n if n > 1e-12 else None


def compute_tc_field(truss: Truss, w: np.ndarray | None = None) -> TCField:
    """Force-weighted axial averages of incident bar directions, split by sign.

    ``w`` is one signed density per bar (default: the governing case).
    """
    w = truss.governing_densities() if w is None else np.asarray(w, dtype=float)
    P = truss.positions
    s = np.abs(w) * truss.lengths
    acc: dict[tuple[int, int], list[np.ndarray]] = {}
    for i, (a, b) in enumerate(truss.edges):
        if w[i] == 0:
            continue
        sign = 1 if w[i] > 0 else -1
        for here, there in ((a, b), (b, a)):
            d = (P[there] - P[here]) / truss.lengths[i]
            acc.setdefault((here, sign), []).append(s[i] * d)
    out = TCField()
    for (k, sign), vecs in acc.items():
        ref = vecs[0]
        total = sum(v if v @ ref >= 0 else -v for v in vecs)
        u = _unit(total)
        if u is None:
            continue
        jid = truss.joints[k].id
        (out.tension if sign > 0 else out.compression)[jid] = u
    return out


def bezier_point(ctrl: np.ndarray, t: float) -> np.ndarray:
    """de Casteljau evaluation of a Bezier curve with control points ``ctrl`` (n, d)."""
    pts = np.asarray(ctrl, dtype=float)
    while len(pts) > 1:
        pts = (1 - t) * pts[:-1] + t * pts[1:]
    return pts[0]


def bezier_midpoint(p_i, p_j, v_i, v_j) -> np.ndarray:
    """Mid-point of the cubic through p_i, p_j with end tangents v_i, v_j and handles L/3."""
    p_i, p_j = np.asarray(p_i, float), np.asarray(p_j, float)
    chord = p_j - p_i
    L = float(np.linalg.norm(chord))
    if L <= 0:
        raise ValueError("zero-length chord")
    if v_i is None or v_j is None:
        return 0.5 * (p_i + p_j)
    v_i, v_j = np.asarray(v_i, float), np.asarray(v_j, float)
    if v_i @ chord < 0:
        v_i = -v_i
    if v_j @ chord < 0:
        v_j = -v_j
    ctrl = np.array([p_i, p_i + L / 3 * v_i, p_j - L / 3 * v_j, p_j])
    return bezier_point(ctrl, 0.5)


def _tangent(chord: np.ndarray, other_dir: np.ndarray | None) -> np.ndarray | None:
    """Chord direction projected orthogonal to the opposite-sign field direction."""
    if other_dir is None:
        return None
    return _unit(chord - (chord @ other_dir) * other_dir)


def _simple_quad_2d(P: np.ndarray) -> bool:
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def seg_cross(a, b, c, d):
        return cross(a, b, c) * cross(a, b, d) < 0 and cross(c, d, a) * cross(c, d, b) < 0

    return not (seg_cross(P[0], P[1], P[2], P[3]) or seg_cross(P[1], P[2], P[3], P[0]))


def _convex(P: np.ndarray) -> bool:
    """Convexity of a planar polygon (3D points are projected onto their best-fit plane)."""
    if P.shape[1] == 3:
        c = P.mean(axis=0)
        _, _, vt = np.linalg.svd(P - c)
        P = (P - c) @ vt[:2].T
    n = len(P)
    z = [
        (P[(k + 1) % n][0] - P[k][0]) * (P[(k + 2) % n][1] - P[(k + 1) % n][1])
        - (P[(k + 1) % n][1] - P[k][1]) * (P[(k + 2) % n][0] - P[(k + 1) % n][0])
        for k in range(n)
    ]
    return all(x > 0 for x in z) or all(x < 0 for x in z)


def extract_cells(truss: Truss, planarity: float = 0.1) -> list[Cell]:
    """All triangles and chordless, simple (planar in 3D) quadrilaterals."""
    adj = truss.adjacency()
    pos = {j.id: np.asarray(j.position, float) for j in truss.joints}
    w = truss.governing_densities()
    sign = {b.key: int(np.sign(x)) for b, x in zip(truss.bars, w)}

    def signs(cyc):
        n = len(cyc)
        return tuple(sign[tuple(sorted((cyc[k], cyc[(k + 1) % n])))] for k in range(n))

    cells = []
    ids = sorted(adj)
    for a in ids:
        for b in sorted(x for x in adj[a] if x > a):
            for c in sorted(adj[a] & adj[b]):
                if c > b:
                    cells.append(Cell(CellKind.TRIANGLE, (a, b, c), signs((a, b, c))))
    seen = set()
    for a in ids:
        for c in ids:
            if c <= a or c in adj[a]:
                continue
            common = sorted(adj[a] & adj[c])
            for ib, b in enumerate(common):
                for d in common[ib + 1 :]:
                    if d in adj[b]:
                        continue
                    key = frozenset((a, b, c, d))
                    if key in seen:
                        continue
                    seen.add(key)
                    cyc = (a, b, c, d)
                    P = np.array([pos[v] for v in cyc])
                    if P.shape[1] == 2:
                        if not _simple_quad_2d(P):
                            continue
                    else:
                        ctr = P.mean(axis=0)
                        _, _, vt = np.linalg.svd(P - ctr)
                        dev = np.abs((P - ctr) @ vt[2]).max()
                        mean_edge = np.mean([np.linalg.norm(P[k] - P[(k + 1) % 4]) for k in range(4)])
                        if dev > planarity * mean_edge:
                            continue
                    cells.append(Cell(CellKind.QUAD, cyc, signs(cyc)))
    return cells


def _alternating(cell: Cell) -> bool:
    s = cell.signs
    return 0 not in s and s[0] == s[2] and s[1] == s[3] and s[0] != s[1]


def _odd_edge(cell: Cell) -> int | None:
    s = cell.signs
    if 0 in s or len(set(s)) == 1:
        return None
    for k in range(3):
        if s[k] != s[(k + 1) % 3] and s[k] != s[(k + 2) % 3]:
            return k
    return None


def subdivide(
    truss: Truss,
    spec: FunctionalSpec | None = None,
    w: np.ndarray | None = None,
    curved: bool = True,
    brace: bool = False,
    keep_chords: str = "none",
) -> Truss:
    """One refinement level; a no-op when no cell qualifies.

    With ``curved=False`` new edge joints sit on the chords, which keeps the
    previous force state admissible. ``brace`` adds both diagonals of every new
    sub-quad as zero-force candidates so a curved net is not a mechanism.
    ``keep_chords`` ("none", "boundary" or "all") keeps split parent bars as
    well; "boundary" only for edges seen by a single cell.
    """
    w = truss.governing_densities() if w is None else np.asarray(w, dtype=float)
    tc = compute_tc_field(truss, w)
    cells = extract_cells(truss)
    pos = {j.id: np.asarray(j.position, float) for j in truss.joints}
    by_key = {b.key: (i, b) for i, b in enumerate(truss.bars)}
    sign_of = {b.key: int(np.sign(x)) for b, x in zip(truss.bars, w)}

    marked: list[tuple[int, int]] = []
    quads: list[Cell] = []
    tris: list[tuple[Cell, int]] = []
    for cell in cells:
        if cell.kind is CellKind.QUAD:
            if _alternating(cell) and _convex(np.array([pos[v] for v in cell.joints])):
                quads.append(cell)
                marked.extend(e for e in cell.edges if e not in marked)
        else:
            k = _odd_edge(cell)
            if k is not None:
                e = cell.edges[k]
                tris.append((cell, k))
                if e not in marked:
                    marked.append(e)
    if not marked:
        return truss

    d = truss.dimension
    K = len(truss.bars[0].force_densities)
    zero_loads = tuple((0.0,) * d for _ in range(K))
    nid = truss.next_joint_id()
    mid: dict[tuple[int, int], int] = {}
    joints = list(truss.joints)
    new_pos: dict[int, np.ndarray] = {}
    bars: list[Bar] = [b for b in truss.bars if b.key not in set(marked)]
    for key in marked:
        i, b = by_key[key]
        a, c = b.endpoints
        chord = pos[c] - pos[a]
        other = tc.compression if sign_of[key] > 0 else tc.tension
        if curved:
            p = bezier_midpoint(pos[a], pos[c], _tangent(chord, other.get(a)), _tangent(chord, other.get(c)))
        else:
            p = 0.5 * (pos[a] + pos[c])
        if spec is not None and not spec.region.admits(p):
            p = 0.5 * (pos[a] + pos[c])
        joints.append(Joint(nid, tuple(float(x) for x in p), JointKind.INTERMEDIATE, zero_loads))
        new_pos[nid] = p
        mid[key] = nid
        bars += [replace(b, endpoints=(a, nid)), replace(b, endpoints=(nid, c))]
        nid += 1

    area = {b.key: b.area for b in truss.bars}
    zero_w = (0.0,) * K
    for cell in quads:
        edge_joints = [mid[e] for e in cell.edges]
        centre = np.mean([new_pos[j] for j in edge_joints], axis=0)
        joints.append(Joint(nid, tuple(float(x) for x in centre), JointKind.INTERMEDIATE, zero_loads))
        a_mean = float(np.mean([area[e] for e in cell.edges]))
        bars += [Bar((j, nid), a_mean, zero_w, 0) for j in edge_joints]
        if brace:
            for k, corner in enumerate(cell.joints):
                before, after = edge_joints[k - 1], edge_joints[k]
                bars += [Bar((corner, nid), a_mean, zero_w, 0), Bar((before, after), a_mean, zero_w, 0)]
        nid += 1
    for cell, k in tris:
        e = cell.edges[k]
        opposite = next(v for v in cell.joints if v not in e)
        a_mean = float(np.mean([area[x] for x in cell.edges]))
        bars.append(Bar((mid[e], opposite), a_mean, zero_w, 0))
    if keep_chords != "none":
        use = {}
        for cell in quads:
            for e in cell.edges:
                use[e] = use.get(e, 0) + 1
        for cell, k in tris:
            use[cell.edges[k]] = use.get(cell.edges[k], 0) + 2
        for key in marked:
            if keep_chords == "all" or use[key] == 1:
                bars.append(by_key[key][1])
    seen = set()
    unique = []
    for b in bars:
        if b.key not in seen:
            seen.add(b.key)
            unique.append(b)
    return Truss(tuple(joints), tuple(unique), d)
