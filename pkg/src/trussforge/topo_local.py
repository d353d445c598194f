"""Local topology clean-up operations applied between geometry optimization rounds."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .model import Bar, FunctionalSpec, Joint, JointKind, Truss, TrussError


@dataclass(frozen=True)
class LocalPassConfig:
    eps1: float = 0.002  # area threshold, relative to the mean bar area
    eps2: float = 0.01  # merge distance, relative to the mean spec-joint distance
    aspect: float = 0.1  # narrow triangle: min altitude / longest edge
    collinear_deg: float = 5.0
    ref_distance: float = 1.0
    max_passes: int = 10

    def __post_init__(self):
        if min(self.eps1, self.eps2, self.aspect, self.collinear_deg, self.ref_distance) <= 0:
            raise ValueError("local pass thresholds must be positive")

    @classmethod
    def for_spec(cls, spec: FunctionalSpec, **kw) -> "LocalPassConfig":
        p = spec.params
        return cls(eps1=p.eps1, eps2=p.eps2, ref_distance=spec.mean_joint_distance(), **kw)

    @property
    def merge_distance(self) -> float:
        return self.eps2 * self.ref_distance


def _fresh_bar(template: Bar, i: int, j: int) -> Bar:
    return replace(template, endpoints=(i, j))


def _dedupe(bars) -> list[Bar]:
    """Drop self-loops; of duplicate bars keep the one with the larger area."""
    best: dict[tuple[int, int], Bar] = {}
    order = []
    for b in bars:
        if b.endpoints[0] == b.endpoints[1]:
            continue
        k = b.key
        if k not in best:
            order.append(k)
            best[k] = b
        elif b.area > best[k].area:
            best[k] = b
    return [best[k] for k in order]


def prune_thin_bars(truss: Truss, threshold: float) -> Truss:
    return truss.with_bars(b for b in truss.bars if b.area >= threshold)


def remove_orphans(truss: Truss) -> Truss:
    used = {i for b in truss.bars for i in b.endpoints}
    return truss.with_joints(j for j in truss.joints if j.id in used or j.kind is not JointKind.INTERMEDIATE)


def merge_close_joints(truss: Truss, tol: float) -> Truss:
    n = len(truss.joints)
    if n < 2:
        return truss
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(cKDTree(truss.positions).query_pairs(tol)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    clusters: dict[int, list[int]] = {}
    for k in range(n):
        clusters.setdefault(find(k), []).append(k)
    if all(len(c) == 1 for c in clusters.values()):
        return truss

    P = truss.positions
    rename: dict[int, int] = {}
    joints = []
    for members in clusters.values():
        spec_members = [k for k in members if truss.joints[k].kind is not JointKind.INTERMEDIATE]
        if len(spec_members) > 1:
            # two specified joints are never fused; the cluster is left alone
            for k in members:
                joints.append((k, truss.joints[k]))
                rename[truss.joints[k].id] = truss.joints[k].id
            continue
        keep = spec_members[0] if spec_members else min(members)
        j = truss.joints[keep]
        if not spec_members and len(members) > 1:
            j = replace(j, position=tuple(float(x) for x in P[members].mean(axis=0)))
        joints.append((keep, j))
        for k in members:
            rename[truss.joints[k].id] = j.id
    joints.sort()
    bars = _dedupe(
        replace(b, endpoints=(rename[b.endpoints[0]], rename[b.endpoints[1]])) for b in truss.bars
    )
    return Truss(tuple(j for _, j in joints), tuple(bars), truss.dimension)


def _crossings(P: np.ndarray, e: np.ndarray, tol: float) -> list[tuple[int, int, float, float]]:
    """Proper interior crossings between 2D segments as (bar_a, bar_b, t_a, t_b)."""
    m = len(e)
    if m < 2:
        return []
    A, B = P[e[:, 0]], P[e[:, 1]]
    D = B - A
    L = np.linalg.norm(D, axis=1)
    out = []
    for i in range(m - 1):
        j = np.arange(i + 1, m)
        shared = (e[j, 0] == e[i, 0]) | (e[j, 0] == e[i, 1]) | (e[j, 1] == e[i, 0]) | (e[j, 1] == e[i, 1])
        den = D[i, 0] * D[j, 1] - D[i, 1] * D[j, 0]
        ok = (~shared) & (np.abs(den) > 1e-12 * L[i] * L[j])
        if not ok.any():
            continue
        j, den = j[ok], den[ok]
        W = A[j] - A[i]
        ta = (W[:, 0] * D[j, 1] - W[:, 1] * D[j, 0]) / den
        tb = (W[:, 0] * D[i, 1] - W[:, 1] * D[i, 0]) / den
        inside = (ta * L[i] > tol) & ((1 - ta) * L[i] > tol) & (tb * L[j] > tol) & ((1 - tb) * L[j] > tol)
        out.extend((i, int(jj), float(a), float(b)) for jj, a, b in zip(j[inside], ta[inside], tb[inside]))
    return out


def split_intersections(truss: Truss, tol: float = 1e-9) -> Truss:
    """Insert a joint at every interior crossing of two bars (2D only)."""
    if truss.dimension != 2:
        return truss
    while True:
        P, e = truss.positions, truss.edges
        found = _crossings(P, e, tol)
        if not found:
            return truss
        busy: set[int] = set()
        nid = truss.next_joint_id()
        K = len(truss.bars[0].force_densities) if truss.bars else 0
        joints = list(truss.joints)
        bars = list(truss.bars)
        drop = set()
        for a, b, ta, _ in found:
            if a in busy or b in busy:
                continue
            busy.update((a, b))
            x = P[e[a, 0]] + ta * (P[e[a, 1]] - P[e[a, 0]])
            joints.append(Joint(nid, tuple(float(v) for v in x), JointKind.INTERMEDIATE, ((0.0, 0.0),) * K))
            for s in (a, b):
                i, j = truss.bars[s].endpoints
                bars += [_fresh_bar(truss.bars[s], i, nid), _fresh_bar(truss.bars[s], nid, j)]
                drop.add(s)
            nid += 1
        bars = [bb for k, bb in enumerate(bars) if k not in drop]
        truss = Truss(tuple(joints), tuple(_dedupe(bars)), 2)


def fix_t_junctions(truss: Truss, tol: float) -> Truss:
    """Joints hovering over a bar's interior get a perpendicular foot joint and a connector."""
    P, e = truss.positions, truss.edges
    if not len(e):
        return truss
    A, B = P[e[:, 0]], P[e[:, 1]]
    D = B - A
    L2 = np.einsum("ij,ij->i", D, D)
    L = np.sqrt(L2)
    hits = []
    taken_bars: set[int] = set()
    taken_joints: set[int] = set()
    for k in range(len(truss.joints)):
        t = np.einsum("ij,ij->i", P[k] - A, D) / L2
        foot = A + t[:, None] * D
        dist = np.linalg.norm(P[k] - foot, axis=1)
        cand = (dist < tol) & (t * L > tol) & ((1 - t) * L > tol) & (e[:, 0] != k) & (e[:, 1] != k)
        for i in np.flatnonzero(cand):
            if i in taken_bars or k in taken_joints:
                continue
            hits.append((k, int(i), foot[i]))
            taken_bars.add(int(i))
            taken_joints.add(k)
    if not hits:
        return truss
    K = len(truss.bars[0].force_densities)
    joints = list(truss.joints)
    bars = [b for i, b in enumerate(truss.bars) if i not in taken_bars]
    nid = truss.next_joint_id()
    for k, i, foot in hits:
        parent = truss.bars[i]
        a, b = parent.endpoints
        zero = tuple((0.0,) * truss.dimension for _ in range(K))
        joints.append(Joint(nid, tuple(float(v) for v in foot), JointKind.INTERMEDIATE, zero))
        bars += [_fresh_bar(parent, a, nid), _fresh_bar(parent, nid, b)]
        bars.append(Bar((truss.joints[k].id, nid), parent.area, (0.0,) * K, 0))
        nid += 1
    return Truss(tuple(joints), tuple(_dedupe(bars)), truss.dimension)


def triangles(truss: Truss) -> list[tuple[int, int, int]]:
    """All 3-cycles as sorted joint-id triples."""
    adj = truss.adjacency()
    out = []
    for a in sorted(adj):
        for b in sorted(x for x in adj[a] if x > a):
            for c in sorted(adj[a] & adj[b]):
                if c > b:
                    out.append((a, b, c))
    return out


def fix_narrow_triangles(truss: Truss, aspect: float = 0.1, spec: FunctionalSpec | None = None) -> Truss:
    """Delete the longest bar of every triangle flatter than ``aspect``.

    With ``spec`` given, a deletion is kept only if the force LP stays feasible
    and the optimal volume does not grow by more than 1e-6.
    """
    P = {j.id: np.asarray(j.position, float) for j in truss.joints}
    doomed: list[tuple[int, int]] = []
    for tri in triangles(truss):
        pts = [P[v] for v in tri]
        edges = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])]
        lens = [np.linalg.norm(pts[0] - pts[1]), np.linalg.norm(pts[1] - pts[2]), np.linalg.norm(pts[0] - pts[2])]
        u, v = pts[1] - pts[0], pts[2] - pts[0]
        cross = np.linalg.norm(np.cross(u, v)) if len(u) == 3 else abs(u[0] * v[1] - u[1] * v[0])
        longest = max(lens)
        altitude = cross / longest  # the smallest altitude drops onto the longest edge
        key = edges[int(np.argmax(lens))]
        if altitude < aspect * longest and key not in doomed:
            doomed.append(key)
    if not doomed:
        return truss
    if spec is None:
        gone = set(doomed)
        return truss.with_bars(b for b in truss.bars if b.key not in gone)

    from .gsm import solve_alg_a

    try:
        V = solve_alg_a(truss, spec).volume
    except TrussError:
        V = np.inf
    for key in doomed:
        trial = truss.with_bars(b for b in truss.bars if b.key != key)
        try:
            Vt = solve_alg_a(trial, spec).volume
        except TrussError:
            continue
        if Vt <= V + 1e-6:
            truss, V = trial, Vt
    return truss


def remove_valence_two(truss: Truss, collinear_deg: float = 5.0) -> Truss:
    """Replace near-straight intermediate joints of valence two by one direct bar."""
    cos_lim = -np.cos(np.radians(collinear_deg))
    while True:
        incident: dict[int, list[int]] = {j.id: [] for j in truss.joints}
        for i, b in enumerate(truss.bars):
            incident[b.endpoints[0]].append(i)
            incident[b.endpoints[1]].append(i)
        target = None
        for j in truss.joints:
            if j.kind is not JointKind.INTERMEDIATE or len(incident[j.id]) != 2:
                continue
            b1, b2 = (truss.bars[i] for i in incident[j.id])
            o1 = b1.endpoints[0] if b1.endpoints[1] == j.id else b1.endpoints[1]
            o2 = b2.endpoints[0] if b2.endpoints[1] == j.id else b2.endpoints[1]
            p = np.asarray(j.position, float)
            v1 = np.asarray(truss.joint(o1).position, float) - p
            v2 = np.asarray(truss.joint(o2).position, float) - p
            c = float(v1 @ v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
            if c <= cos_lim:
                target = (j.id, b1, b2, o1, o2)
                break
        if target is None:
            return truss
        jid, b1, b2, o1, o2 = target
        big = b1 if b1.area >= b2.area else b2
        L_big = np.linalg.norm(np.subtract(truss.joint(big.endpoints[0]).position, truss.joint(big.endpoints[1]).position))
        L_new = np.linalg.norm(np.subtract(truss.joint(o1).position, truss.joint(o2).position))
        # keep the axial force of the dominant half
        w = tuple(float(x) * L_big / L_new for x in big.force_densities)
        merged = replace(big, endpoints=(o1, o2), force_densities=w)
        bars = [b for b in truss.bars if b is not b1 and b is not b2] + [merged]
        joints = [j for j in truss.joints if j.id != jid]
        truss = Truss(tuple(joints), tuple(_dedupe(bars)), truss.dimension)


def _signature(truss: Truss):
    return (
        tuple((j.id, j.position) for j in truss.joints),
        tuple(sorted(b.key for b in truss.bars)),
    )


def apply_local_pass(
    truss: Truss, config: LocalPassConfig, spec: FunctionalSpec | None = None
) -> tuple[Truss, dict[str, int]]:
    """Run all seven operations in a fixed order until nothing changes (at most ``max_passes``).

    ``spec`` switches on the feasibility guard of the narrow-triangle step.
    """
    counts = {
        "prune": 0,
        "orphans": 0,
        "merge": 0,
        "split": 0,
        "t_junction": 0,
        "narrow": 0,
        "valence_two": 0,
        "passes": 0,
    }
    tol = config.merge_distance
    for _ in range(config.max_passes):
        counts["passes"] += 1
        before = _signature(truss)
        nb, nj = len(truss.bars), len(truss.joints)

        a_bar = float(truss.areas.mean()) if truss.bars else 0.0
        truss = prune_thin_bars(truss, config.eps1 * a_bar)
        counts["prune"] += nb - len(truss.bars)
        n0 = len(truss.joints)
        truss = remove_orphans(truss)
        counts["orphans"] += n0 - len(truss.joints)
        n0 = len(truss.joints)
        truss = merge_close_joints(truss, tol)
        counts["merge"] += n0 - len(truss.joints)
        n0 = len(truss.joints)
        truss = split_intersections(truss, 1e-9 * config.ref_distance)
        counts["split"] += len(truss.joints) - n0
        n0 = len(truss.joints)
        truss = fix_t_junctions(truss, tol)
        counts["t_junction"] += len(truss.joints) - n0
        m0 = len(truss.bars)
        truss = fix_narrow_triangles(truss, config.aspect, spec)
        counts["narrow"] += m0 - len(truss.bars)
        n0 = len(truss.joints)
        truss = remove_valence_two(truss, config.collinear_deg)
        counts["valence_two"] += n0 - len(truss.joints)

        if _signature(truss) == before:
            break
    return truss, counts


def light_pass(truss: Truss, config: LocalPassConfig) -> tuple[Truss, dict[str, int]]:
    """Prune and merge only (used after subdivision so fresh joints survive)."""
    nb = len(truss.bars)
    a_bar = float(truss.areas.mean()) if truss.bars else 0.0
    truss = prune_thin_bars(truss, config.eps1 * a_bar)
    pruned = nb - len(truss.bars)
    truss = remove_orphans(truss)
    n0 = len(truss.joints)
    truss = merge_close_joints(truss, config.merge_distance)
    return truss, {"prune": pruned, "merge": n0 - len(truss.joints)}
