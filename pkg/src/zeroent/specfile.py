"""JSON source specifications."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .branches import DrilParams, farey_a, make_b, make_dril_a
from .source import BUNDLED, Measure, TentSource, tabulated


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FareyA(_Strict):
    kind: Literal["farey"]


class DrilA(_Strict):
    kind: Literal["dril"]
    gamma: float
    delta: float
    amplitude: Optional[float] = None
    v0: Optional[float] = None


class FareyB(_Strict):
    kind: Literal["farey"]


class LinearB(_Strict):
    kind: Literal["linear"]
    c: Optional[float] = None


class MeasureSpec(_Strict):
    kind: Literal["uniform", "lin", "exp", "custom"] = "uniform"
    # custom: density values on a uniform grid of [0,1]
    density: Optional[List[float]] = None


class SourceSpec(_Strict):
    a: Annotated[Union[FareyA, DrilA], Field(discriminator="kind")]
    b: Annotated[Union[FareyB, LinearB], Field(discriminator="kind")]
    measure: MeasureSpec = MeasureSpec()


FAREY = {"a": {"kind": "farey"}, "b": {"kind": "farey"}}


class SpecError(ValueError):
    pass


def parse_spec(data: dict) -> SourceSpec:
    try:
        return SourceSpec.model_validate(data)
    except ValidationError as exc:
        raise SpecError(str(exc)) from exc


def load_spec(path: str | Path | None) -> SourceSpec:
    if path is None:
        return parse_spec(FAREY)
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read source spec {path}: {exc}") from exc
    return parse_spec(data)


def canonical(spec: SourceSpec) -> str:
    return json.dumps(spec.model_dump(exclude_none=True), sort_keys=True, separators=(",", ":"))


def spec_hash(spec: SourceSpec) -> str:
    return hashlib.sha256(canonical(spec).encode()).hexdigest()[:16]


def build_source(spec: SourceSpec) -> TentSource:
    if spec.a.kind == "farey":
        a = farey_a()
    else:
        a = make_dril_a(DrilParams(spec.a.gamma, spec.a.delta, spec.a.amplitude, spec.a.v0))
    if spec.b.kind == "farey":
        b = make_b("farey")
    else:
        c = spec.b.c if spec.b.c is not None else float(a(np.array([1.0]))[0])
        b = make_b("linear", c=c)
    return TentSource(a, b)


def build_measure(spec: SourceSpec) -> Measure:
    m = spec.measure
    if m.kind == "custom":
        if not m.density or len(m.density) < 2:
            raise SpecError("custom measure needs a density list of at least two values")
        if min(m.density) <= 0:
            raise SpecError("custom measure density must be positive")
        return tabulated(np.array(m.density), "custom")
    return BUNDLED[m.kind]()


def build(spec: SourceSpec) -> tuple[TentSource, Measure]:
    try:
        return build_source(spec), build_measure(spec)
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def source_to_spec(src: TentSource, measure: str = "uniform") -> dict:
    d = src.spec
    if d is None:
        raise ValueError("source has custom branches and no JSON form")
    d = dict(d)
    d["measure"] = {"kind": measure}
    return d
