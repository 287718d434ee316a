"""Run configuration: strict JSON in, validated dataclasses out.

Unknown keys are fatal everywhere.  A silently ignored misspelling
("lamda", "cells_per_axes") would not crash anything, it would just run the
wrong physics, so every loader collects the full list of problems and
raises them together.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .grid import Grid
from .memory import SCHEMES
from .params import ModelParams, ParamError, params_from_json
from .solver import ProbeSpec, SourceSpec, default_probes, probe_from_json
from .sources import SourceError


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configurations."""


_TOP_KEYS = {
    "params", "grid", "dt", "T", "scheme", "sources", "probes",
    "output_stride", "output_dir", "seed", "cg_tol", "cg_max_iter",
    "keep_history", "dump_fields", "cell", "kernel", "study", "compare",
}


@dataclass(frozen=True)
class CellConfig:
    eps: float = 0.1
    mesh_points: int = 2000
    eps_values: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True)
class KernelConfig:
    input: str = "all"  # "constant", "ramp", "sinusoid" or "all"
    schemes: tuple[str, ...] = SCHEMES
    levels: int = 5


@dataclass(frozen=True)
class StudyConfig:
    kind: str = "space"  # "space", "time", "beta-limit" or "steady"
    levels: int = 3
    base_cells: int = 8
    base_dt: float = 0.04
    T: float = 0.4


@dataclass(frozen=True)
class CompareConfig:
    trials: int = 20
    cases: tuple[str, ...] = ("both", "no-alpha", "no-beta")
    cells_per_axis: int = 16
    dt: float = 0.05
    T: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    grid: Grid
    sources: SourceSpec | None = None
    dt: float = 0.01
    T: float = 1.0
    scheme: str = "backward-euler"
    probes: tuple[ProbeSpec, ...] = field(default_factory=default_probes)
    output_stride: int = 1
    output_dir: str = "out"
    seed: int = 0
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None
    keep_history: bool = False
    dump_fields: bool = False
    cell: CellConfig = field(default_factory=CellConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "grid": {
                "dim": self.grid.dim,
                "cells_per_axis": self.grid.cells_per_axis,
                "extent": [list(ab) for ab in self.grid.extent],
            },
            "sources": self.sources.to_json() if self.sources is not None else None,
            "dt": self.dt,
            "T": self.T,
            "scheme": self.scheme,
            "probes": [p.to_json() for p in self.probes],
            "output_stride": self.output_stride,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "cg_tol": self.cg_tol,
            "cg_max_iter": self.cg_max_iter,
            "keep_history": self.keep_history,
            "dump_fields": self.dump_fields,
        }


def _sub_config(cls, obj, name: str, problems: list[str], casts: dict | None = None):
    """Build a frozen sub-config dataclass from a dict with strict keys."""
    import dataclasses

    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(obj) - set(fields)
    if unknown:
        problems.append(f"{name}: unknown key: " + ", ".join(sorted(unknown)))
        return cls()
    kwargs = {}
    for key, val in obj.items():
        cast = (casts or {}).get(key)
        try:
            kwargs[key] = cast(val) if cast else val
        except (TypeError, ValueError) as exc:
            problems.append(f"{name}.{key}: {exc}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{name}: {exc}")
        return cls()


def config_from_dict(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    problems: list[str] = []
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        problems.append("unknown key: " + ", ".join(sorted(unknown)))

    params = None
    if "params" not in obj:
        problems.append("missing required section 'params'")
    else:
        try:
            params = params_from_json(obj["params"])
        except ParamError as exc:
            problems.append(f"params: {exc}")

    grid = None
    grid_obj = obj.get("grid", {})
    if not isinstance(grid_obj, dict):
        problems.append("grid must be an object")
    else:
        g_unknown = set(grid_obj) - {"dim", "cells_per_axis", "extent"}
        if g_unknown:
            problems.append("grid: unknown key: " + ", ".join(sorted(g_unknown)))
        else:
            dim = grid_obj.get("dim", params.n if params else 3)
            extent = grid_obj.get("extent")
            try:
                grid = Grid(
                    dim=int(dim),
                    cells_per_axis=int(grid_obj.get("cells_per_axis", 32)),
                    extent=tuple(tuple(ab) for ab in extent) if extent else None,
                )
            except (TypeError, ValueError) as exc:
                problems.append(f"grid: {exc}")
    if grid is not None and params is not None and grid.dim != params.n:
        problems.append(
            f"grid dimension {grid.dim} does not match the model dimension n = {params.n}"
        )

    # sources are required to run a simulation but not for the cell or study
    # commands, so a missing section only fails at the point of use
    sources = None
    if "sources" in obj and params is not None:
        try:
            sources = SourceSpec.from_json(obj["sources"], params)
        except SourceError as exc:
            problems.append(f"sources: {exc}")

    probes: tuple[ProbeSpec, ...] = default_probes()
    if "probes" in obj:
        try:
            probes = tuple(probe_from_json(p) for p in obj["probes"])
        except (TypeError, ValueError) as exc:
            problems.append(f"probes: {exc}")
    if grid is not None:
        for p in probes:
            if p.kind != "point":
                continue
            if len(p.coords) != grid.dim:
                problems.append(f"probes: {p.label} has {len(p.coords)} coords "
                                f"for a {grid.dim}d grid")
                continue
            for ax, c in enumerate(p.coords):
                lo, hi = grid.extent[ax]
                if not lo < c < hi:
                    problems.append(f"probes: {p.label} coordinate {c:g} lies "
                                    f"outside the open box on axis {ax}")
                    break

    dt = obj.get("dt", 0.01)
    horizon = obj.get("T", 1.0)
    scheme = obj.get("scheme", "backward-euler")
    stride = obj.get("output_stride", 1)
    seed = obj.get("seed", 0)
    cg_tol = obj.get("cg_tol", 1e-10)
    cg_max_iter = obj.get("cg_max_iter")
    if not isinstance(dt, (int, float)) or dt <= 0:
        problems.append(f"dt must be positive, got {dt!r}")
    if not isinstance(horizon, (int, float)) or horizon <= 0:
        problems.append(f"T must be positive, got {horizon!r}")
    elif isinstance(dt, (int, float)) and 0 < horizon < dt:
        problems.append(f"dt = {dt!r} must not exceed T = {horizon!r}")
    if scheme not in SCHEMES:
        problems.append(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if not isinstance(stride, int) or stride < 1:
        problems.append(f"output_stride must be a positive integer, got {stride!r}")
    if not isinstance(seed, int):
        problems.append(f"seed must be an integer, got {seed!r}")
    if not isinstance(cg_tol, (int, float)) or not 0 < cg_tol < 1:
        problems.append(f"cg_tol must lie in (0, 1), got {cg_tol!r}")
    if cg_max_iter is not None and (not isinstance(cg_max_iter, int) or cg_max_iter < 1):
        problems.append(f"cg_max_iter must be a positive integer, got {cg_max_iter!r}")

    cell = _sub_config(CellConfig, obj.get("cell", {}), "cell", problems,
                       casts={"eps": float, "mesh_points": int,
                              "eps_values": lambda v: tuple(float(x) for x in v)})
    kernel = _sub_config(KernelConfig, obj.get("kernel", {}), "kernel", problems,
                         casts={"input": str, "levels": int,
                                "schemes": lambda v: tuple(str(s) for s in v)})
    study = _sub_config(StudyConfig, obj.get("study", {}), "study", problems,
                        casts={"kind": str, "levels": int, "base_cells": int,
                               "base_dt": float, "T": float})
    compare = _sub_config(CompareConfig, obj.get("compare", {}), "compare", problems,
                          casts={"trials": int, "cells_per_axis": int, "dt": float,
                                 "T": float, "cases": lambda v: tuple(str(s) for s in v)})
    if kernel.input not in ("constant", "ramp", "sinusoid", "all"):
        problems.append(f"kernel.input must name an input family, got {kernel.input!r}")
    bad = set(kernel.schemes) - set(SCHEMES)
    if bad:
        problems.append(f"kernel.schemes: unknown scheme(s) {sorted(bad)}")
    if study.kind not in ("space", "time", "beta-limit", "steady"):
        problems.append(f"study.kind must be space, time, beta-limit or steady, got {study.kind!r}")
    bad = set(compare.cases) - {"both", "no-alpha", "no-beta"}
    if bad:
        problems.append(f"compare.cases: unknown case(s) {sorted(bad)}")

    if problems:
        raise ConfigError("; ".join(problems))

    return RunConfig(
        params=params,
        grid=grid,
        sources=sources,
        dt=float(dt),
        T=float(horizon),
        scheme=scheme,
        probes=probes,
        output_stride=stride,
        output_dir=str(obj.get("output_dir", "out")),
        seed=seed,
        cg_tol=float(cg_tol),
        cg_max_iter=cg_max_iter,
        keep_history=bool(obj.get("keep_history", False)),
        dump_fields=bool(obj.get("dump_fields", False)),
        cell=cell,
        kernel=kernel,
        study=study,
        compare=compare,
    )


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration from disk."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(obj)
