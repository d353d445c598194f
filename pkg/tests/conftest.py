from __future__ import annotations

import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from trussforge.model import Bar, Box, DesignRegion, FunctionalSpec, Joint, JointKind, PipelineParams, Truss

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

S, L, I = JointKind.SUPPORT, JointKind.LOADED, JointKind.INTERMEDIATE

# acceptance outcomes, filled by test_acceptance.py and printed at the end of the run
CRITERIA: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def make_spec(joints, K=1, bounds=None, **params) -> FunctionalSpec:
    d = len(joints[0][1])
    js = []
    for jid, pos, kind, loads in joints:
        loads = tuple(tuple(map(float, f)) for f in loads) if loads else tuple((0.0,) * d for _ in range(K))
        js.append(Joint(jid, tuple(map(float, pos)), kind, loads))
    region = DesignRegion(Box(*bounds)) if bounds else DesignRegion.unbounded(d)
    return FunctionalSpec(tuple(js), K, region, 1.0, PipelineParams(**params))


@pytest.fixture
def fan_spec():
    return make_spec([(0, (-1, 1), S, None), (1, (1, 1), S, None), (2, (0, 0), L, [(0, -1)])], n=1)


@pytest.fixture
def square_truss():
    """Unit square with both diagonals, supports on the left."""
    joints = (
        Joint(0, (0.0, 0.0), S, ((0.0, 0.0),)),
        Joint(1, (1.0, 0.0), I, ((0.0, 0.0),)),
        Joint(2, (1.0, 1.0), L, ((0.0, -1.0),)),
        Joint(3, (0.0, 1.0), S, ((0.0, 0.0),)),
    )
    edges = [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)]
    return Truss(joints, tuple(Bar(e, 1.0, (0.0,)) for e in edges), 2)


def random_spec(rng: np.random.Generator, loads: int = 2, supports: int = 2, n: int = 3) -> FunctionalSpec:
    """Random 2D spec on the unit square with supports on the left edge."""
    joints = []
    ys = np.sort(rng.uniform(0.0, 1.0, supports))
    for k, y in enumerate(ys):
        joints.append((k, (0.0, float(y)), S, None))
    for k in range(loads):
        p = (float(rng.uniform(0.4, 1.0)), float(rng.uniform(0.0, 1.0)))
        f = rng.normal(size=2)
        joints.append((supports + k, p, L, [tuple(f / np.linalg.norm(f))]))
    return make_spec(joints, bounds=((0.0, 0.0), (1.0, 1.0)), n=n)


def build_truss(points, edges, densities=None, kinds=None, areas=None) -> Truss:
    """2D/3D truss from raw coordinates; joint ids are list positions."""
    d = len(points[0])
    kinds = kinds or {}
    joints = tuple(Joint(k, tuple(map(float, p)), kinds.get(k, I), ((0.0,) * d,)) for k, p in enumerate(points))
    densities = densities if densities is not None else [0.0] * len(edges)
    areas = areas if areas is not None else [1.0] * len(edges)
    bars = tuple(Bar(tuple(e), float(a), (float(w),), 0) for e, w, a in zip(edges, densities, areas))
    return Truss(joints, bars, d)


_RUNS: dict[str, tuple] = {}


@pytest.fixture(scope="session")
def pipeline_run():
    """Full pipeline result per bundled fixture, computed once per session."""
    import time

    from trussforge.io import load_fixture
    from trussforge.pipeline import run_pipeline

    def get(name):
        if name not in _RUNS:
            spec = load_fixture(name)
            t0 = time.perf_counter()
            truss, report = run_pipeline(spec)
            _RUNS[name] = (spec, truss, report, time.perf_counter() - t0)
        return _RUNS[name]

    return get
