import math

import numpy as np
import pytest

from conftest import build_truss
from trussforge.subdivision import CellKind, bezier_midpoint, bezier_point, compute_tc_field, extract_cells, subdivide

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
RING = [(0, 1), (1, 2), (2, 3), (0, 3)]


def bernstein_mid(ctrl):
    ctrl = np.asarray(ctrl, float)
    return (ctrl[0] + 3 * ctrl[1] + 3 * ctrl[2] + ctrl[3]) / 8


def test_tc_field_averages_by_force():
    t = build_truss([(0, 0), (1, 0), (0, 1), (-1, 0)], [(0, 1), (0, 2), (0, 3)], [1.0, 1.0, -1.0])
    tc = compute_tc_field(t)
    np.testing.assert_allclose(tc.tension[0], np.array([1, 1]) / math.sqrt(2))
    np.testing.assert_allclose(np.abs(tc.compression[0]), [1, 0])
    assert tc.orthogonality([0]) == pytest.approx(1 / math.sqrt(2))


def test_tc_field_ignores_zero_bars():
    t = build_truss([(0, 0), (1, 0)], [(0, 1)], [0.0])
    tc = compute_tc_field(t)
    assert not tc.tension and not tc.compression
    assert math.isnan(tc.orthogonality())


def test_straight_bezier_is_the_chord_midpoint():
    np.testing.assert_allclose(bezier_midpoint((0, 0), (2, 2), (1, 1), (1, 1)), (1, 1))


def test_bezier_midpoint_matches_bernstein_form():
    r = 1 / math.sqrt(2)
    got = bezier_midpoint((0, 0), (1, 0), (r, r), (r, -r))
    want = bernstein_mid([(0, 0), (r / 3, r / 3), (1 - r / 3, r / 3), (1, 0)])
    np.testing.assert_allclose(got, want, atol=1e-15)
    assert got[1] == pytest.approx(math.sqrt(2) / 8)


def test_missing_tangent_falls_back_to_chord():
    np.testing.assert_allclose(bezier_midpoint((0, 0), (1, 0), None, (0, 1)), (0.5, 0))


def test_de_casteljau_endpoints():
    ctrl = np.random.default_rng(0).normal(size=(4, 2))
    np.testing.assert_allclose(bezier_point(ctrl, 0.0), ctrl[0])
    np.testing.assert_allclose(bezier_point(ctrl, 1.0), ctrl[-1])


@pytest.mark.parametrize(
    "edges, tris, quads",
    [
        ([(0, 1), (1, 2), (0, 2)], 1, 0),
        (RING + [(0, 2)], 2, 0),
        (RING, 0, 1),
    ],
)
def test_cell_extraction(edges, tris, quads):
    pts = SQUARE if len(edges) > 3 else SQUARE[:3]
    cells = extract_cells(build_truss(pts, edges, [1.0] * len(edges)))
    assert sum(c.kind is CellKind.TRIANGLE for c in cells) == tris
    assert sum(c.kind is CellKind.QUAD for c in cells) == quads


def test_bowtie_is_not_a_cell():
    pts = [(0, 0), (1, 1), (1, 0), (0, 1)]
    assert extract_cells(build_truss(pts, RING, [1.0] * 4)) == []


def test_alternating_quad_splits_into_four():
    t = build_truss(SQUARE, RING, [1.0, -1.0, 1.0, -1.0])
    out = subdivide(t)
    assert len(out.joints) == 4 + 5
    assert len(out.bars) == 12
    centre = out.joints[-1].position
    np.testing.assert_allclose(centre, (0.5, 0.5), atol=1e-12)


def test_mixed_triangle_gets_one_connector():
    t = build_truss([(0, 0), (2, 0), (1, 1)], [(0, 1), (1, 2), (0, 2)], [-1.0, 1.0, 1.0])
    out = subdivide(t)
    assert len(out.joints) == 4 and len(out.bars) == 5
    new = out.joints[-1].id
    assert (2, new) in {b.key for b in out.bars}


def test_same_sign_truss_is_untouched():
    t = build_truss(SQUARE, RING + [(0, 2)], [1.0] * 5)
    assert subdivide(t) is t


def test_halves_inherit_parent_area():
    t = build_truss([(0, 0), (2, 0), (1, 1)], [(0, 1), (1, 2), (0, 2)], [-1.0, 1.0, 1.0], areas=[3.0, 1.0, 1.0])
    out = subdivide(t)
    new = out.joints[-1].id
    halves = [b for b in out.bars if new in b.endpoints and 2 not in b.endpoints]
    assert [b.area for b in halves] == [3.0, 3.0]


def test_keep_chords_keeps_parents():
    t = build_truss(SQUARE, RING, [1.0, -1.0, 1.0, -1.0])
    out = subdivide(t, keep_chords="all")
    assert {e for e in RING} <= {b.key for b in out.bars}
    assert len(out.bars) == 16


def test_straight_variant_uses_chord_midpoints():
    t = build_truss(SQUARE, RING, [1.0, -1.0, 1.0, -1.0])
    out = subdivide(t, curved=False)
    got = sorted(j.position for j in out.joints[4:8])
    assert got == sorted([(0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 0.5)])


def test_curved_midpoints_bulge_on_a_fan():
    # compression at the apex meets tension on the tie, so the tie midpoint is pulled off its chord
    pts = [(0, 0), (2, 0), (1, 1)]
    t = build_truss(pts, [(0, 1), (1, 2), (0, 2)], [1.0, -1.0, -1.0])
    tc = compute_tc_field(t)
    mid = subdivide(t).joints[-1].position
    assert tc.compression[0] is not None
    assert mid[1] != pytest.approx(0.0, abs=1e-6)
