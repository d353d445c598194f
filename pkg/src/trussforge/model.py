"""Domain types: joints, bars, trusses and the functional specification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

Vec = tuple[float, ...]


class JointKind(str, enum.Enum):
    SUPPORT = "support"
    LOADED = "loaded"
    INTERMEDIATE = "intermediate"


class TrussError(Exception):
    """Base class for recoverable modelling errors."""


class UnsupportableError(TrussError):
    """The loads cannot be carried by the given joints and bars."""


@dataclass(frozen=True)
class Joint:
    id: int
    position: Vec
    kind: JointKind = JointKind.INTERMEDIATE
    loads: tuple[Vec, ...] = ()

    @property
    def fixed(self) -> bool:
        return self.kind is JointKind.SUPPORT

    @property
    def movable(self) -> bool:
        return self.kind is JointKind.INTERMEDIATE


@dataclass(frozen=True)
class Bar:
    endpoints: tuple[int, int]
    area: float = 0.0
    force_densities: tuple[float, ...] = ()
    governing_case: int = 0

    @property
    def key(self) -> tuple[int, int]:
        i, j = self.endpoints
        return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Box:
    lo: Vec
    hi: Vec

    def contains(self, p, tol: float = 1e-12) -> bool:
        return all(l - tol <= x <= h + tol for x, l, h in zip(p, self.lo, self.hi))

    def interior_contains(self, p, tol: float = 1e-12) -> bool:
        return all(l + tol < x < h - tol for x, l, h in zip(p, self.lo, self.hi))


@dataclass(frozen=True)
class DesignRegion:
    bounds: Box
    obstacles: tuple[Box, ...] = ()

    @classmethod
    def unbounded(cls, dimension: int) -> "DesignRegion":
        return cls(Box((-math.inf,) * dimension, (math.inf,) * dimension))

    def admits(self, p, tol: float = 1e-9) -> bool:
        return self.bounds.contains(p, tol) and not any(o.interior_contains(p, tol) for o in self.obstacles)

    def clamp(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, np.asarray(self.bounds.lo), np.asarray(self.bounds.hi))

    def segment_hits_obstacle(self, a, b) -> bool:
        return any(_segment_enters_box(np.asarray(a, float), np.asarray(b, float), o) for o in self.obstacles)


def _segment_enters_box(a: np.ndarray, b: np.ndarray, box: Box, tol: float = 1e-9) -> bool:
    """Slab test: does the open segment pass through the box interior?"""
    t0, t1 = 0.0, 1.0
    d = b - a
    for k in range(len(a)):
        lo, hi = box.lo[k] + tol, box.hi[k] - tol
        if abs(d[k]) < 1e-15:
            if not lo < a[k] < hi:
                return False
            continue
        u0, u1 = (lo - a[k]) / d[k], (hi - a[k]) / d[k]
        if u0 > u1:
            u0, u1 = u1, u0
        t0, t1 = max(t0, u0), min(t1, u1)
        if t0 >= t1:
            return False
    return True


@dataclass(frozen=True)
class PipelineParams:
    n: int | None = None  # grid points per axis; None = number of spec joints
    p_max1: int = 5
    p_max2: int = 3
    n_max: int = 500
    s_max: int = 10
    eps1: float = 0.002
    eps2: float = 0.01
    stabilize: bool = False
    min_rel_improvement: float = 1e-7
    max_bars: int = 1500  # refinement stops before a level would exceed this

    def __post_init__(self):
        for name in ("p_max1", "n_max", "s_max", "max_bars"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.p_max2 < 0:
            raise ValueError("p_max2 must be nonnegative")
        if self.n is not None and self.n <= 0:
            raise ValueError("n must be positive")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("eps1 and eps2 must be positive")


@dataclass(frozen=True)
class FunctionalSpec:
    joints: tuple[Joint, ...]
    load_cases: int
    region: DesignRegion
    sigma: float = 1.0
    params: PipelineParams = field(default_factory=PipelineParams)
    name: str = ""

    @property
    def dimension(self) -> int:
        return len(self.joints[0].position)

    @cached_property
    def joint_ids(self) -> frozenset[int]:
        return frozenset(j.id for j in self.joints)

    def mean_joint_distance(self) -> float:
        pts = np.array([j.position for j in self.joints], dtype=float)
        if len(pts) < 2:
            return 1.0
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        iu = np.triu_indices(len(pts), 1)
        return float(d[iu].mean())


@dataclass(frozen=True)
class Truss:
    joints: tuple[Joint, ...]
    bars: tuple[Bar, ...]
    dimension: int

    def __post_init__(self):
        ids = [j.id for j in self.joints]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate joint ids")
        known = set(ids)
        seen = set()
        for b in self.bars:
            i, j = b.endpoints
            if i == j:
                raise ValueError(f"bar {b.endpoints} has identical endpoints")
            if i not in known or j not in known:
                raise ValueError(f"bar {b.endpoints} references a missing joint")
            if b.key in seen:
                raise ValueError(f"duplicate bar {b.key}")
            seen.add(b.key)

    # -- cached array views ------------------------------------------
    @cached_property
    def index(self) -> dict[int, int]:
        return {j.id: k for k, j in enumerate(self.joints)}

    @cached_property
    def positions(self) -> np.ndarray:
        p = np.array([j.position for j in self.joints], dtype=float).reshape(len(self.joints), self.dimension)
        p.flags.writeable = False
        return p

    @cached_property
    def edges(self) -> np.ndarray:
        """Bar endpoints as row indices into ``positions``, shape (m, 2)."""
        e = np.array([[self.index[b.endpoints[0]], self.index[b.endpoints[1]]] for b in self.bars], dtype=int)
        return e.reshape(len(self.bars), 2)

    @cached_property
    def lengths(self) -> np.ndarray:
        p, e = self.positions, self.edges
        return np.linalg.norm(p[e[:, 1]] - p[e[:, 0]], axis=1)

    @property
    def areas(self) -> np.ndarray:
        return np.array([b.area for b in self.bars], dtype=float)

    def densities(self, k: int | None = None) -> np.ndarray:
        """Force densities, shape (m, K); or one case when ``k`` is given."""
        w = np.array([b.force_densities for b in self.bars], dtype=float)
        if k is not None:
            return w[:, k] if w.size else np.zeros(len(self.bars))
        return w

    def governing_densities(self) -> np.ndarray:
        if not self.bars:
            return np.zeros(0)
        w = self.densities()
        if w.ndim < 2 or w.shape[1] == 0:
            return np.zeros(len(self.bars))
        g = np.array([b.governing_case for b in self.bars])
        return w[np.arange(len(self.bars)), g]

    def joint(self, jid: int) -> Joint:
        return self.joints[self.index[jid]]

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {j.id: set() for j in self.joints}
        for b in self.bars:
            i, j = b.endpoints
            adj[i].add(j)
            adj[j].add(i)
        return adj

    # -- functional updates ------------------------------------------
    def with_positions(self, positions: np.ndarray) -> "Truss":
        joints = tuple(replace(j, position=tuple(float(x) for x in p)) for j, p in zip(self.joints, positions))
        return Truss(joints, self.bars, self.dimension)

    def with_bars(self, bars: Iterable[Bar]) -> "Truss":
        return Truss(self.joints, tuple(bars), self.dimension)

    def with_joints(self, joints: Iterable[Joint]) -> "Truss":
        return Truss(tuple(joints), self.bars, self.dimension)

    def next_joint_id(self) -> int:
        return max((j.id for j in self.joints), default=-1) + 1

    @classmethod
    def from_spec(cls, spec: FunctionalSpec, bars: Sequence[Bar] = ()) -> "Truss":
        return cls(tuple(spec.joints), tuple(bars), spec.dimension)


@dataclass
class PhaseRecord:
    label: str
    bars: int
    volume: float
    seconds: float


@dataclass
class OptimizationReport:
    phases: list[PhaseRecord] = field(default_factory=list)
    alp_volumes: list[float] = field(default_factory=list)
    operations: dict[str, int] = field(default_factory=dict)

    def add_phase(self, label: str, truss: Truss, seconds: float) -> None:
        self.phases.append(PhaseRecord(label, len(truss.bars), total_volume(truss), seconds))

    def count(self, counts: dict[str, int]) -> None:
        for k, v in counts.items():
            self.operations[k] = self.operations.get(k, 0) + v

    def merge(self, other: "OptimizationReport") -> None:
        self.phases.extend(other.phases)
        self.alp_volumes.extend(other.alp_volumes)
        self.count(other.operations)


def total_volume(truss: Truss) -> float:
    if not truss.bars:
        return 0.0
    return float(np.dot(truss.lengths, truss.areas))


def validate_spec(spec: FunctionalSpec, tol: float = 1e-9) -> list[str]:
    """Human-readable invariant violations; an empty list means none."""
    out: list[str] = []
    if spec.load_cases < 1:
        out.append("load_cases: at least one load case is required")
    if not spec.joints:
        return out + ["joints: the specification has no joints"]
    d = spec.dimension
    if d not in (2, 3):
        out.append(f"dimension: must be 2 or 3, got {d}")
    if spec.sigma <= 0:
        out.append("sigma: admissible stress must be positive")
    ids = [j.id for j in spec.joints]
    if len(set(ids)) != len(ids):
        out.append("joints: duplicate joint ids")
    for j in spec.joints:
        if len(j.position) != d:
            out.append(f"joint {j.id}: position has {len(j.position)} coordinates, expected {d}")
            continue
        if not all(math.isfinite(x) for x in j.position):
            out.append(f"joint {j.id}: non-finite position")
        if j.kind is JointKind.INTERMEDIATE:
            out.append(f"joint {j.id}: specifications hold only support and loaded joints")
        if len(j.loads) != spec.load_cases:
            out.append(f"joint {j.id}: has {len(j.loads)} load vectors, expected {spec.load_cases}")
        elif any(len(f) != d for f in j.loads):
            out.append(f"joint {j.id}: load vector of wrong dimension")
        elif j.kind is JointKind.LOADED and not any(any(x != 0 for x in f) for f in j.loads):
            out.append(f"joint {j.id}: loaded joint carries no nonzero force")
        if not spec.region.admits(j.position):
            out.append(f"joint {j.id}: position lies outside the design region")
    if out:
        return out

    if not any(j.kind is JointKind.SUPPORT for j in spec.joints):
        pts = np.array([j.position for j in spec.joints], dtype=float)
        for k in range(spec.load_cases):
            F = np.array([j.loads[k] for j in spec.joints], dtype=float)
            scale = float(np.max(np.linalg.norm(F, axis=1), initial=0.0))
            net = F.sum(axis=0)
            if np.linalg.norm(net) > tol * max(scale, 1e-300):
                out.append(f"load case {k}: unbalanced forces (net force {net.tolist()})")
            if d == 2:
                torque = float(np.sum(pts[:, 0] * F[:, 1] - pts[:, 1] * F[:, 0]))
                tnorm = abs(torque)
            else:
                torque = np.cross(pts, F).sum(axis=0)
                tnorm = float(np.linalg.norm(torque))
            lever = float(np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1), initial=0.0))
            if tnorm > tol * max(scale * max(lever, 1.0), 1e-300):
                out.append(f"load case {k}: unbalanced torques (net moment {torque if d == 2 else torque.tolist()})")
    return out


def equilibrium_residual(truss: Truss, spec: FunctionalSpec, case: int) -> float:
    """Max-norm of C^T w + f over the non-support degrees of freedom."""
    from .equilibrium import assemble_C

    if not 0 <= case < spec.load_cases:
        raise IndexError(f"load case {case} out of range (K={spec.load_cases})")
    system = assemble_C(truss, spec)
    if system.n_rows == 0:
        return 0.0
    w = truss.densities(case) if truss.bars else np.zeros(0)
    r = system.CT @ w + system.loads[case]
    return float(np.max(np.abs(r)))
