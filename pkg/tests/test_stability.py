import itertools

import numpy as np
import pytest

from conftest import L, S, build_truss
from oracles import stability_counts
from trussforge.model import TrussError
from trussforge.stability import check_external_stability, stability_count, stabilize


@pytest.mark.parametrize("E, r, V, stable", [(26, 4, 15, True), (27, 4, 16, False), (28, 4, 16, True)])
def test_counting_triples(E, r, V, stable):
    rep = stability_count(E, r, V, 2)
    assert rep.stable is stable is stability_counts(E, r, V, 2)
    assert rep.deficit == (0 if stable else 1)


def grid_truss(n=4, diagonals=3, supports=(0, 3)):
    pts = [(x, y) for y in range(n) for x in range(n)]
    edges = []
    for y in range(n):
        for x in range(n):
            k = y * n + x
            if x + 1 < n:
                edges.append((k, k + 1))
            if y + 1 < n:
                edges.append((k, k + n))
    cells = [(y * n + x) for y in range(n - 1) for x in range(n - 1)]
    edges += [(c, c + n + 1) for c in cells[:diagonals]]
    kinds = {s: S for s in supports}
    kinds[n * n - 1] = L
    return build_truss(pts, edges, kinds=kinds)


def test_grid_fixture_counts():
    t = grid_truss()
    rep = check_external_stability(t)
    assert (rep.bars, rep.reactions, rep.joints) == (27, 4, 16)
    assert rep.deficit == 1


def test_stabilize_adds_exactly_one_bar():
    t = grid_truss()
    out = stabilize(t, a_min=1e-3)
    assert len(out.bars) == 28
    assert check_external_stability(out).stable
    (new,) = [b for b in out.bars if b.key not in {x.key for x in t.bars}]
    assert new.area == 1e-3 and new.force_densities == (0.0,)


def test_stable_truss_is_identity():
    t = grid_truss(diagonals=4)
    assert stabilize(t) is t


def test_shortest_bars_first_on_a_chain():
    # five joints in an open zigzag, supports at both ends: deficit 2
    pts = [(0, 0), (1, 1), (2, 0), (3, 1), (4, 0)]
    t = build_truss(pts, [(0, 1), (1, 2), (2, 3), (3, 4)], kinds={0: S, 4: S})
    rep = check_external_stability(t)
    out = stabilize(t)
    added = [b.key for b in out.bars if b.key not in {x.key for x in t.bars}]
    assert len(added) == rep.deficit == 2
    # greedy oracle: shortest non-crossing pairs
    have = {tuple(sorted(e)) for e in t.edges.tolist()}
    cand = sorted(
        (float(np.hypot(*np.subtract(pts[a], pts[b]))), (a, b))
        for a, b in itertools.combinations(range(5), 2)
        if (a, b) not in have
    )
    assert [c[1] for c in cand[:2]] == added


def test_impossible_stabilization_raises():
    t = build_truss([(0, 0), (1, 0)], [(0, 1)], kinds={1: L})
    with pytest.raises(TrussError):
        stabilize(t)
