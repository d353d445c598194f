"""JSON spec and truss files, SVG and OBJ export."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .model import (
    Bar,
    Box,
    DesignRegion,
    FunctionalSpec,
    Joint,
    JointKind,
    PipelineParams,
    Truss,
    TrussError,
    UnsupportableError,
    total_volume,
    validate_spec,
)

TRUSS_FORMAT = "trussforge.truss/1"


class SpecFormatError(TrussError):
    """Malformed JSON or a schema violation; ``problems`` lists every finding."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


_NUM = {"type": "number"}
_BOUND = {"type": ["number", "null"]}
_VEC = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}
_BOX = {
    "type": "object",
    "properties": {"lo": {"type": "array", "items": _BOUND}, "hi": {"type": "array", "items": _BOUND}},
    "required": ["lo", "hi"],
    "additionalProperties": False,
}
_PARAMS = {
    "type": "object",
    "properties": {
        "n": {"type": ["integer", "null"], "minimum": 1},
        "p_max1": {"type": "integer", "minimum": 1},
        "p_max2": {"type": "integer", "minimum": 0},
        "n_max": {"type": "integer", "minimum": 1},
        "s_max": {"type": "integer", "minimum": 1},
        "eps1": {"type": "number", "exclusiveMinimum": 0},
        "eps2": {"type": "number", "exclusiveMinimum": 0},
        "stabilize": {"type": "boolean"},
        "min_rel_improvement": {"type": "number", "minimum": 0},
        "max_bars": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}
SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "dimension": {"enum": [2, 3]},
        "load_cases": {"type": "integer", "minimum": 1},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "joints": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "integer"},
                    "pos": _VEC,
                    "kind": {"enum": ["support", "loaded"]},
                    "loads": {"type": "array", "items": _VEC},
                },
                "required": ["id", "pos", "kind"],
                "additionalProperties": False,
            },
        },
        "region": {
            "type": "object",
            "properties": {"bounds": _BOX, "obstacles": {"type": "array", "items": _BOX}},
            "additionalProperties": False,
        },
        "params": _PARAMS,
    },
    "required": ["dimension", "joints"],
    "additionalProperties": False,
}


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _bounds(values, fill: float) -> tuple[float, ...]:
    return tuple(fill if v is None else float(v) for v in values)


def spec_from_dict(doc: dict[str, Any]) -> FunctionalSpec:
    """Build and validate a spec. Shape errors raise SpecFormatError, unbalanced loads UnsupportableError."""
    errors = sorted(jsonschema.Draft202012Validator(SPEC_SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise SpecFormatError([f"{_where(e)}: {e.message}" for e in errors])
    d = doc["dimension"]
    K = doc.get("load_cases", 1)
    problems = []
    joints = []
    for k, j in enumerate(doc["joints"]):
        if len(j["pos"]) != d:
            problems.append(f"joints/{k}/pos: expected {d} coordinates")
        loads = j.get("loads", [[0.0] * d for _ in range(K)])
        if len(loads) != K:
            problems.append(f"joints/{k}/loads: expected {K} load vectors, got {len(loads)}")
        if any(len(f) != d for f in loads):
            problems.append(f"joints/{k}/loads: vectors must have {d} components")
        joints.append(
            Joint(j["id"], tuple(float(x) for x in j["pos"]), JointKind(j["kind"]), tuple(tuple(map(float, f)) for f in loads))
        )
    region_doc = doc.get("region", {})
    boxes = [region_doc["bounds"]] if "bounds" in region_doc else []
    boxes += region_doc.get("obstacles", [])
    for b in boxes:
        if len(b["lo"]) != d or len(b["hi"]) != d:
            problems.append(f"region: boxes need {d} lower and upper bounds")
    if problems:
        raise SpecFormatError(problems)
    if "bounds" in region_doc:
        bounds = Box(_bounds(region_doc["bounds"]["lo"], -math.inf), _bounds(region_doc["bounds"]["hi"], math.inf))
    else:
        bounds = Box((-math.inf,) * d, (math.inf,) * d)
    obstacles = tuple(Box(_bounds(o["lo"], -math.inf), _bounds(o["hi"], math.inf)) for o in region_doc.get("obstacles", []))
    try:
        params = PipelineParams(**doc.get("params", {}))
    except ValueError as exc:
        raise SpecFormatError([f"params: {exc}"]) from None
    spec = FunctionalSpec(
        tuple(joints), K, DesignRegion(bounds, obstacles), float(doc.get("sigma", 1.0)), params, doc.get("name", "")
    )
    problems = validate_spec(spec)
    if problems:
        balance = [p for p in problems if p.startswith("load case")]
        if len(balance) == len(problems):
            raise UnsupportableError("; ".join(balance))
        raise SpecFormatError(problems)
    return spec


def _json_bound(x: float) -> float | None:
    return None if math.isinf(x) else x


def spec_to_dict(spec: FunctionalSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    if spec.name:
        doc["name"] = spec.name
    doc["dimension"] = spec.dimension
    doc["load_cases"] = spec.load_cases
    doc["sigma"] = spec.sigma
    doc["joints"] = [
        {"id": j.id, "pos": list(j.position), "kind": j.kind.value, "loads": [list(f) for f in j.loads]} for j in spec.joints
    ]
    region: dict[str, Any] = {}
    b = spec.region.bounds
    if not all(math.isinf(x) for x in (*b.lo, *b.hi)):
        region["bounds"] = {"lo": [_json_bound(x) for x in b.lo], "hi": [_json_bound(x) for x in b.hi]}
    if spec.region.obstacles:
        region["obstacles"] = [
            {"lo": [_json_bound(x) for x in o.lo], "hi": [_json_bound(x) for x in o.hi]} for o in spec.region.obstacles
        ]
    doc["region"] = region
    doc["params"] = {f.name: getattr(spec.params, f.name) for f in fields(PipelineParams)}
    return doc


def parse_spec_text(text: str, source: str = "<string>") -> FunctionalSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError([f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    return spec_from_dict(doc)


def parse_spec(path: str | Path) -> FunctionalSpec:
    path = Path(path)
    return parse_spec_text(path.read_text(), str(path))


def dumps(doc: Any) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def spec_hash(spec: FunctionalSpec) -> str:
    canon = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# -- truss files -------------------------------------------------------------


def truss_to_dict(truss: Truss, spec: FunctionalSpec | None = None, phase: str = "") -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": TRUSS_FORMAT,
        "dimension": truss.dimension,
        "joints": [
            {"id": j.id, "pos": list(j.position), "kind": j.kind.value, "loads": [list(f) for f in j.loads]}
            for j in truss.joints
        ],
        "bars": [
            {
                "endpoints": list(b.endpoints),
                "area": b.area,
                "force_densities": list(b.force_densities),
                "governing_case": b.governing_case,
            }
            for b in truss.bars
        ],
        "volume": total_volume(truss),
    }
    prov: dict[str, Any] = {"phase": phase}
    if spec is not None:
        prov["spec_hash"] = spec_hash(spec)
        prov["params"] = asdict(spec.params)
    doc["provenance"] = prov
    return doc


def truss_from_dict(doc: dict[str, Any]) -> Truss:
    if doc.get("format") != TRUSS_FORMAT:
        raise SpecFormatError([f"format: expected {TRUSS_FORMAT!r}"])
    try:
        joints = tuple(
            Joint(j["id"], tuple(map(float, j["pos"])), JointKind(j["kind"]), tuple(tuple(map(float, f)) for f in j["loads"]))
            for j in doc["joints"]
        )
        bars = tuple(
            Bar(tuple(b["endpoints"]), float(b["area"]), tuple(map(float, b["force_densities"])), int(b["governing_case"]))
            for b in doc["bars"]
        )
        return Truss(joints, bars, int(doc["dimension"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecFormatError([f"truss file: {exc}"]) from None


def write_truss(path: str | Path, truss: Truss, spec: FunctionalSpec | None = None, phase: str = "") -> None:
    Path(path).write_text(dumps(truss_to_dict(truss, spec, phase)))


def read_truss(path: str | Path) -> Truss:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecFormatError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    return truss_from_dict(doc)


# -- fixtures shipped with the package ---------------------------------------


def fixture_names() -> list[str]:
    root = resources.files("trussforge") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("trussforge") / "fixtures" / f"{name}.json"))


def load_fixture(name: str) -> FunctionalSpec:
    return parse_spec(fixture_path(name))


# -- exporters ---------------------------------------------------------------

TENSION = "#1f4fd6"
COMPRESSION = "#d62728"
NEUTRAL = "#888888"
JOINT_COLORS = {JointKind.SUPPORT: "#d62728", JointKind.LOADED: "#1f4fd6", JointKind.INTERMEDIATE: "#e8c31a"}


@dataclass(frozen=True)
class SVGOptions:
    width: float = 800.0
    margin: float = 24.0
    max_stroke: float = 8.0
    joint_radius: float = 3.0


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def export_svg(truss: Truss, opts: SVGOptions | None = None) -> str:
    """Red compression, blue tension, stroke width proportional to sqrt(area)."""
    if truss.dimension != 2:
        raise ValueError("SVG export needs a 2D truss")
    opts = opts or SVGOptions()
    P = truss.positions
    if len(P):
        lo, hi = P.min(axis=0), P.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.maximum(hi - lo, 1e-12)
    scale = (opts.width - 2 * opts.margin) / float(max(span[0], span[1]))
    height = span[1] * scale + 2 * opts.margin

    def xy(p):
        return opts.margin + (p[0] - lo[0]) * scale, height - opts.margin - (p[1] - lo[1]) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(opts.width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(opts.width)} {_fmt(height)}">',
        f'<rect width="100%" height="100%" fill="white"/>',
    ]
    areas = truss.areas
    amax = float(areas.max()) if len(areas) and areas.max() > 0 else 1.0
    w = truss.governing_densities()
    for k, bar in enumerate(truss.bars):
        if areas[k] <= 0:
            continue
        color = TENSION if w[k] > 0 else COMPRESSION if w[k] < 0 else NEUTRAL
        (x1, y1), (x2, y2) = xy(P[truss.edges[k, 0]]), xy(P[truss.edges[k, 1]])
        width = max(opts.max_stroke * math.sqrt(areas[k] / amax), 0.25)
        out.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}" stroke-linecap="round"/>'
        )
    for j, p in zip(truss.joints, P):
        x, y = xy(p)
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(opts.joint_radius)}" fill="{JOINT_COLORS[j.kind]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_obj(truss: Truss) -> tuple[str, dict[str, Any]]:
    """Wavefront OBJ (vertices and ``l`` records) plus a sidecar with the bar areas."""
    lines = ["# trussforge truss", f"# joints {len(truss.joints)} bars {len(truss.bars)}"]
    for p in truss.positions:
        q = list(p) + [0.0] * (3 - len(p))
        lines.append("v " + " ".join(repr(float(x)) for x in q))
    for a, b in truss.edges:
        lines.append(f"l {a + 1} {b + 1}")
    sidecar = {
        "joint_ids": [j.id for j in truss.joints],
        "bars": [{"endpoints": list(b.endpoints), "area": b.area} for b in truss.bars],
    }
    return "\n".join(lines) + "\n", sidecar
