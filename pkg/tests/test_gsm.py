import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import L, S, make_spec, random_spec
from oracles import one_bar_volume, symmetric_fan_volume
from trussforge.equilibrium import assemble_B, assemble_C, delta_C_triplets, free_dof_index
from trussforge.gsm import governing_cases, size_truss, solve_alg_a
from trussforge.model import Truss, UnsupportableError, equilibrium_residual
from trussforge.pipeline import init_truss


def test_free_dofs_skip_supports(square_truss):
    idx = free_dof_index(square_truss)
    assert set(idx) == {(1, 0), (1, 1), (2, 0), (2, 1)}


def test_column_rule_on_one_bar():
    spec = make_spec([(0, (0, 0), S, None), (1, (2, 0), L, [(1, 0)])])
    t = init_truss(spec, 1)
    sysm = assemble_C(t, spec)
    # row of joint 1: -2 w + f = 0, so the pulling load gives w > 0 (tension)
    np.testing.assert_allclose(sysm.CT.toarray(), [[-2.0], [0.0]])
    np.testing.assert_allclose(assemble_B(t, spec).toarray(), [[-1.0], [0.0]])


def test_delta_c_matches_finite_change(square_truss):
    """C is linear in the coordinates, so C(p + u) - C(p) equals the linear map exactly."""
    spec = make_spec([(0, (0, 0), S, None), (2, (1, 1), L, [(0, -1)]), (3, (0, 1), S, None)])
    rng = np.random.default_rng(0)
    u = np.zeros((4, 2))
    u[1] = rng.normal(size=2) * 0.1
    u_index = np.array([-1, 0, -1, -1])
    w = rng.normal(size=6)
    rr, cc, vv = delta_C_triplets(square_truss, w, u_index)
    dC = np.zeros((assemble_C(square_truss, spec).n_rows, 2))
    np.add.at(dC, (rr, cc), vv)
    moved = square_truss.with_positions(square_truss.positions + u)
    diff = assemble_C(moved, spec).CT @ w - assemble_C(square_truss, spec).CT @ w
    np.testing.assert_allclose(dC @ u[1], diff, atol=1e-14)


def test_one_bar():
    spec = make_spec([(0, (0, 0), S, None), (1, (1, 0), L, [(1, 0)])])
    res = solve_alg_a(init_truss(spec, 1), spec)
    assert res.volume == one_bar_volume(1.0, 1.0)
    assert res.force_densities[0, 0] > 0  # tension


def test_fan_matches_hand_statics(fan_spec):
    t, res = size_truss(init_truss(fan_spec, 1), fan_spec)
    assert res.volume == pytest.approx(symmetric_fan_volume(1.0, 1.0, 1.0), abs=1e-12)
    assert equilibrium_residual(t, fan_spec, 0) < 1e-12


def test_sigma_scales_volume():
    spec = make_spec([(0, (0, 0), S, None), (1, (3, 4), L, [(0.6, 0.8)])])
    spec2 = type(spec)(spec.joints, 1, spec.region, 4.0, spec.params)
    assert solve_alg_a(init_truss(spec2, 1), spec2).volume == pytest.approx(5 / 4)


def test_no_bars_with_loads_is_unsupportable(fan_spec):
    t = Truss(fan_spec.joints, (), 2)
    with pytest.raises(UnsupportableError):
        solve_alg_a(t, fan_spec)


def test_mechanism_is_unsupportable():
    # a load perpendicular to the only bar
    spec = make_spec([(0, (0, 0), S, None), (1, (1, 0), L, [(0, 1)])])
    with pytest.raises(UnsupportableError):
        solve_alg_a(init_truss(spec, 1), spec)


def test_governing_case_ties_go_low():
    w = np.array([[1.0, -1.0], [0.5, 2.0], [0.0, 0.0]])
    assert governing_cases(w).tolist() == [0, 1, 0]


def test_multi_load_sizes_by_max_case():
    # case 0 pulls right, case 1 pushes left twice as hard
    spec = make_spec(
        [(0, (0, 0), S, [(0, 0), (0, 0)]), (1, (1, 0), L, [(1, 0), (-2, 0)])], K=2
    )
    t, res = size_truss(init_truss(spec, 1), spec)
    assert res.volume == pytest.approx(2.0)
    assert t.bars[0].governing_case == 1
    for k in range(2):
        assert equilibrium_residual(t, spec, k) < 1e-12


def with_loads(truss, spec, pick):
    """Same bars and joints, loads replaced per joint by ``pick(joint)``."""
    joints = tuple(replace(j, loads=pick(j)) for j in truss.joints)
    K = len(joints[0].loads)
    return truss.with_joints(joints), replace(spec, joints=joints[: len(spec.joints)], load_cases=K)


def test_single_case_is_lower_bound_for_two_cases():
    rng = np.random.default_rng(5)
    base = random_spec(rng)
    t = init_truss(base, 3)
    both_t, both = with_loads(t, base, lambda j: (j.loads[0], (j.loads[0][1], -j.loads[0][0])))
    v_both = solve_alg_a(both_t, both).volume
    for k in range(2):
        single_t, single = with_loads(both_t, both, lambda j: (j.loads[k],))
        assert solve_alg_a(single_t, single).volume <= v_both + 1e-9


@given(st.integers(0, 10_000))
def test_equilibrium_and_area_rule_hold(seed):
    spec = random_spec(np.random.default_rng(seed))
    t, res = size_truss(init_truss(spec, 3), spec)
    assert equilibrium_residual(t, spec, 0) <= 1e-8
    np.testing.assert_allclose(t.areas, t.lengths * np.abs(res.force_densities[:, 0]), atol=1e-12)
    assert res.volume == pytest.approx(float(t.lengths @ t.areas), rel=1e-12)


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_volume_is_linear_in_load(seed, scale):
    spec = random_spec(np.random.default_rng(seed))
    t = init_truss(spec, 2)
    v = solve_alg_a(t, spec).volume
    st_, sspec = with_loads(t, spec, lambda j: tuple(tuple(scale * x for x in f) for f in j.loads))
    assert solve_alg_a(st_, sspec).volume == pytest.approx(scale * v, rel=1e-7)


def test_dense_ground_structure_beats_simple_layout():
    spec = make_spec([(0, (0, 0), S, None), (1, (0, 1), S, None), (2, (2, 0.5), L, [(0, -1)])], bounds=((0, 0), (2, 1)))
    simple = solve_alg_a(init_truss(spec, 1), spec).volume
    dense = solve_alg_a(init_truss(spec, 5), spec).volume
    assert dense <= simple + 1e-12
    assert simple == pytest.approx(2 * math.hypot(2, 0.5) ** 2 / 1.0, rel=1e-12)
