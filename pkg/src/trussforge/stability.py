"""External-stability counting and auxiliary-bar stabilization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Bar, FunctionalSpec, JointKind, Truss, TrussError


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    deficit: int
    bars: int
    reactions: int
    joints: int


def stability_count(bars: int, reactions: int, joints: int, dimension: int) -> StabilityReport:
    """|E| + r >= d |V|."""
    deficit = max(0, dimension * joints - bars - reactions)
    return StabilityReport(deficit == 0, deficit, bars, reactions, joints)


def check_external_stability(truss: Truss, spec: FunctionalSpec | None = None) -> StabilityReport:
    d = truss.dimension
    r = d * sum(j.kind is JointKind.SUPPORT for j in truss.joints)
    return stability_count(len(truss.bars), r, len(truss.joints), d)


def _crosses_any(P: np.ndarray, e: np.ndarray, a: int, b: int, tol: float = 1e-9) -> bool:
    """Does segment (a, b) properly cross any bar in ``e`` (2D)?"""
    if not len(e):
        return False
    keep = (e[:, 0] != a) & (e[:, 0] != b) & (e[:, 1] != a) & (e[:, 1] != b)
    e = e[keep]
    A, B = P[e[:, 0]], P[e[:, 1]]
    D = B - A
    d = P[b] - P[a]
    den = d[0] * D[:, 1] - d[1] * D[:, 0]
    ok = np.abs(den) > 1e-12
    W = A - P[a]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (W[:, 0] * D[:, 1] - W[:, 1] * D[:, 0]) / den
        t = (W[:, 0] * d[1] - W[:, 1] * d[0]) / den
    return bool(np.any(ok & (s > tol) & (s < 1 - tol) & (t > tol) & (t < 1 - tol)))


def _candidates(truss: Truss, spec: FunctionalSpec | None) -> list[tuple[float, int, int]]:
    P = truss.positions
    n = len(truss.joints)
    have = {b.key for b in truss.bars}
    scale = float(np.ptp(P, axis=0).max()) if n else 1.0
    tol = 1e-9 * max(scale, 1.0)
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            ia, ib = truss.joints[a].id, truss.joints[b].id
            if (min(ia, ib), max(ia, ib)) in have:
                continue
            D = P[b] - P[a]
            L = float(np.linalg.norm(D))
            if L <= tol:
                continue
            # no third joint on the segment
            t = (P - P[a]) @ D / (L * L)
            foot = P[a] + t[:, None] * D
            on = (np.linalg.norm(P - foot, axis=1) < tol) & (t * L > tol) & ((1 - t) * L > tol)
            if on.any():
                continue
            if spec is not None and spec.region.obstacles and spec.region.segment_hits_obstacle(P[a], P[b]):
                continue
            out.append((L, a, b))
    out.sort()
    return out


def stabilize(truss: Truss, spec: FunctionalSpec | None = None, a_min: float = 1e-3) -> Truss:
    """Add the shortest admissible bars (area ``a_min``) until the count condition holds."""
    rep = check_external_stability(truss, spec)
    if rep.stable:
        return truss
    K = len(truss.bars[0].force_densities) if truss.bars else (spec.load_cases if spec else 1)
    added = []
    edges = [tuple(x) for x in truss.edges]
    for L, a, b in _candidates(truss, spec):
        if len(added) == rep.deficit:
            break
        if truss.dimension == 2 and _crosses_any(truss.positions, np.array(edges).reshape(-1, 2), a, b):
            continue
        added.append(Bar((truss.joints[a].id, truss.joints[b].id), a_min, (0.0,) * K, 0))
        edges.append((a, b))
    if len(added) < rep.deficit:
        raise TrussError(f"cannot stabilize: only {len(added)} of {rep.deficit} admissible bars available")
    return truss.with_bars(list(truss.bars) + added)
