"""Time stepping for the coupled bulk/memory system on a box.

Space is discretized with the (2d+1)-point Dirichlet stencil on interior
nodes, time with backward Euler for u.  The memory update (backward Euler
or trapezoid in v) is affine in the unknown u at the new time level,

    v_new = v_base + u_coeff * u_new,

so v is eliminated exactly before the linear solve: each step reduces to one
symmetric positive definite system

    (-Lap_h + c I) u_new = f_new + (alpha/dt) u_old + A * v_base,
    c = alpha/dt + A * (1 - u_coeff),

solved matrix-free with conjugate gradients.  The operator is an M-matrix
and c > 0 for every admissible parameter set, which is what the sign
preservation studies lean on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import Field, Grid
from .memory import MemoryState, SCHEMES, scheme_taps
from .params import ModelParams
from .sources import Source, SourceError, source_from_json


class LinearSolveError(RuntimeError):
    """Conjugate gradients failed to reach the requested tolerance."""


@dataclass(frozen=True)
class SourceSpec:
    """The pair of forcing terms driving one simulation."""

    f: Source
    g: Source

    @classmethod
    def from_json(cls, obj, params: ModelParams) -> "SourceSpec":
        if not isinstance(obj, dict) or set(obj) != {"f", "g"}:
            raise SourceError("sources must be an object with exactly the keys 'f' and 'g'")
        return cls(f=source_from_json(obj["f"], params), g=source_from_json(obj["g"], params))

    def to_json(self) -> dict:
        return {"f": self.f.to_json(), "g": self.g.to_json()}


class StencilOperator:
    """Matrix-free application of -Lap_h + shift on a grid's interior nodes."""

    def __init__(self, grid: Grid, shift: float = 0.0):
        if shift < 0:
            raise ValueError("shift must be >= 0 to keep the operator positive definite")
        self.grid = grid
        self.shift = float(shift)
        self._inv_h2 = 1.0 / grid.h**2

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = kernels.neg_laplacian(x.reshape(self.grid.shape), self._inv_h2).ravel()
        if self.shift != 0.0:
            out += self.shift * x
        return out

    def shifted(self, extra: float) -> "StencilOperator":
        return StencilOperator(self.grid, self.shift + extra)


def assemble_operator(grid: Grid, shift: float = 0.0) -> StencilOperator:
    return StencilOperator(grid, shift)


@dataclass(frozen=True)
class SolveResult:
    field: Field
    iterations: int
    residual: float


def cg(op: StencilOperator, b: np.ndarray, tol: float = 1e-10,
       max_iter: int | None = None, x0: np.ndarray | None = None) -> tuple[np.ndarray, int, float]:
    """Plain conjugate gradients, relative residual termination."""
    b = np.asarray(b, dtype=np.float64).ravel()
    b_norm = math.sqrt(float(np.dot(b, b)))
    if b_norm == 0.0:
        return np.zeros_like(b), 0, 0.0
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.asarray(x0, dtype=np.float64).ravel().copy()
        r = b - op.apply(x)
    if max_iter is None:
        max_iter = max(2000, 20 * b.size)
    rs = float(np.dot(r, r))
    if math.sqrt(rs) <= tol * b_norm:
        return x, 0, math.sqrt(rs) / b_norm
    p = r.copy()
    for k in range(max_iter):
        ap = op.apply(p)
        alpha = rs / float(np.dot(p, ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.dot(r, r))
        if math.sqrt(rs_new) <= tol * b_norm:
            return x, k + 1, math.sqrt(rs_new) / b_norm
        p *= rs_new / rs
        p += r
        rs = rs_new
    raise LinearSolveError(
        f"cg stalled at relative residual {math.sqrt(rs) / b_norm:.3e} after {max_iter} iterations"
    )


def solve_linear(op: StencilOperator, rhs, tol: float = 1e-10,
                 max_iter: int | None = None, x0=None) -> SolveResult:
    """Solve op * u = rhs and report the iteration count alongside the field."""
    values = rhs.values if isinstance(rhs, Field) else np.asarray(rhs)
    x0_values = x0.values if isinstance(x0, Field) else x0
    x, iters, rel = cg(op, values, tol=tol, max_iter=max_iter, x0=x0_values)
    return SolveResult(field=Field(op.grid, x), iterations=iters, residual=rel)


@dataclass(frozen=True)
class CoupledState:
    """Solution pair at one time level plus step bookkeeping."""

    u: Field
    memory: MemoryState
    t: float
    step_index: int = 0

    @property
    def v(self) -> Field:
        return Field(self.u.grid, self.memory.v)

    def h_values(self) -> np.ndarray:
        return self.u.values - self.memory.v


def _memory_elimination(params: ModelParams, dt: float, scheme: str,
                        memory: MemoryState, g_new: np.ndarray) -> tuple[np.ndarray, float]:
    """Affine decomposition v_new = v_base + u_coeff * u_new for one step."""
    kappa, beta, mu = params.kappa, params.beta, params.mu
    if beta == 0.0:
        # the memory equation degenerates to mu*v = kappa*u + g, scheme-free
        return g_new / mu, kappa / mu
    if scheme == "backward-euler":
        denom = beta + mu * dt
        return (beta * memory.v + dt * g_new) / denom, dt * kappa / denom
    if scheme == "trapezoid":
        denom = beta + 0.5 * mu * dt
        half = 0.5 * dt / denom
        v_base = ((beta - 0.5 * mu * dt) / denom) * memory.v + half * (memory.drive + g_new)
        return v_base, half * kappa
    raise ValueError(f"unknown scheme {scheme!r}")


def advance(state: CoupledState, dt: float, src: SourceSpec, params: ModelParams,
            scheme: str = "backward-euler", cg_tol: float = 1e-10,
            cg_max_iter: int | None = None) -> CoupledState:
    """Take one implicit step of size dt from the given state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.u.grid
    t_new = state.t + dt
    f_new = src.f.value(grid, t_new)
    g_new = src.g.value(grid, t_new)
    v_base, u_coeff = _memory_elimination(params, dt, scheme, state.memory, g_new)
    shift = params.alpha / dt + params.A_strange * (1.0 - u_coeff)
    rhs = f_new + params.A_strange * v_base
    if params.alpha > 0:
        rhs = rhs + (params.alpha / dt) * state.u.values
    op = StencilOperator(grid, shift)
    u_new, _, _ = cg(op, rhs, tol=cg_tol, max_iter=cg_max_iter, x0=state.u.values)
    v_new = v_base + u_coeff * u_new
    mem = MemoryState(v=v_new, drive=params.kappa * u_new + g_new, t=t_new)
    return CoupledState(u=Field(grid, u_new), memory=mem, t=t_new,
                        step_index=state.step_index + 1)


def initial_state(grid: Grid, params: ModelParams, src: SourceSpec,
                  cg_tol: float = 1e-10, cg_max_iter: int | None = None) -> CoupledState:
    """Consistent state at t = 0 under zero initial data.

    With alpha > 0 the concentration starts at zero.  With alpha = 0 the bulk
    equation is elliptic at every instant, so the start value already has to
    satisfy it: u(0) solves (-Lap_h + A) u = f(0) against the zero memory.
    """
    g0 = src.g.value(grid, 0.0)
    if params.alpha > 0:
        u0 = np.zeros(grid.n_interior)
    else:
        op = StencilOperator(grid, params.A_strange)
        u0, _, _ = cg(op, src.f.value(grid, 0.0), tol=cg_tol, max_iter=cg_max_iter)
    drive0 = params.kappa * u0 + g0
    v0 = drive0 / params.mu if params.beta == 0.0 else np.zeros(grid.n_interior)
    mem = MemoryState(v=v0, drive=drive0, t=0.0)
    return CoupledState(u=Field(grid, u0), memory=mem, t=0.0, step_index=0)


# ---------------------------------------------------------------------------
# probes and full runs


_NORM_KINDS = ("L2", "max", "min")
_FIELD_KINDS = ("u", "v", "H")


@dataclass(frozen=True)
class ProbeSpec:
    """One scalar diagnostic recorded per output step."""

    kind: str  # "norm" or "point"
    field: str  # "u", "v" or "H"
    norm: str | None = None
    coords: tuple[float, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("norm", "point"):
            raise ValueError(f"unknown probe kind {self.kind!r}")
        if self.field not in _FIELD_KINDS:
            raise ValueError(f"unknown probe field {self.field!r}")
        if self.kind == "norm" and self.norm not in _NORM_KINDS:
            raise ValueError(f"unknown probe norm {self.norm!r}")
        if self.kind == "point" and not self.coords:
            raise ValueError("point probes need coords")
        if self.coords is not None:
            object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "norm":
            return f"{self.field}_{self.norm}"
        return f"{self.field}_at_" + "_".join(f"{c:g}" for c in self.coords)

    def _values(self, state: CoupledState) -> np.ndarray:
        if self.field == "u":
            return state.u.values
        if self.field == "v":
            return state.memory.v
        return state.h_values()

    def evaluate(self, state: CoupledState) -> float:
        vals = self._values(state)
        grid = state.u.grid
        if self.kind == "norm":
            if self.norm == "L2":
                return grid.norm_l2(vals)
            return float(np.max(vals)) if self.norm == "max" else float(np.min(vals))
        if len(self.coords) != grid.dim:
            raise ValueError("probe coords do not match the grid dimension")
        idx = []
        for ax, c in enumerate(self.coords):
            lo, hi = grid.extent[ax]
            h = (hi - lo) / grid.cells_per_axis
            node = int(round((c - lo) / h))  # node index, boundary = 0 and m
            idx.append(min(max(node - 1, 0), grid.cells_per_axis - 2))
        return float(vals.reshape(grid.shape)[tuple(idx)])

    def to_json(self) -> dict:
        out = {"kind": self.kind, "field": self.field}
        if self.norm is not None:
            out["norm"] = self.norm
        if self.coords is not None:
            out["coords"] = list(self.coords)
        if self.name is not None:
            out["name"] = self.name
        return out


def default_probes() -> tuple[ProbeSpec, ...]:
    specs = [ProbeSpec("norm", f, n) for f in ("u", "v", "H") for n in ("L2",)]
    specs += [ProbeSpec("norm", f, n) for f in ("u", "v") for n in ("min", "max")]
    return tuple(specs)


def probe_from_json(obj) -> ProbeSpec:
    if not isinstance(obj, dict):
        raise ValueError("probe must be an object")
    allowed = {"kind", "field", "norm", "coords", "name"}
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError("unknown key: " + ", ".join(sorted(unknown)))
    coords = obj.get("coords")
    return ProbeSpec(
        kind=obj.get("kind", ""),
        field=obj.get("field", ""),
        norm=obj.get("norm"),
        coords=tuple(coords) if coords is not None else None,
        name=obj.get("name"),
    )


@dataclass
class SimulationResult:
    """Probe table plus, when requested, the stored state history."""

    grid: Grid
    params: ModelParams
    probe_names: list[str]
    times: np.ndarray
    probe_table: np.ndarray  # (n_records, n_probes)
    final_state: CoupledState
    history_times: np.ndarray | None = None
    u_history: np.ndarray | None = None
    v_history: np.ndarray | None = None


def run_simulation(config) -> SimulationResult:
    """Run a configured simulation; see config.RunConfig for the knobs."""
    grid, params, src = config.grid, config.params, config.sources
    n_steps = int(round(config.T / config.dt))
    if n_steps < 1 or abs(n_steps * config.dt - config.T) > 1e-8 * max(1.0, config.T):
        raise ValueError("T must be a positive integer multiple of dt")
    probes = list(config.probes)
    state = initial_state(grid, params, src, cg_tol=config.cg_tol,
                          cg_max_iter=config.cg_max_iter)

    record_times = [state.t]
    rows = [[p.evaluate(state) for p in probes]]
    keep = bool(getattr(config, "keep_history", False))
    hist_t, hist_u, hist_v = [state.t], [state.u.values.copy()], [state.memory.v.copy()]

    for k in range(n_steps):
        state = advance(state, config.dt, src, params, scheme=config.scheme,
                        cg_tol=config.cg_tol, cg_max_iter=config.cg_max_iter)
        if keep:
            hist_t.append(state.t)
            hist_u.append(state.u.values.copy())
            hist_v.append(state.memory.v.copy())
        if state.step_index % config.output_stride == 0 or k == n_steps - 1:
            record_times.append(state.t)
            rows.append([p.evaluate(state) for p in probes])

    return SimulationResult(
        grid=grid,
        params=params,
        probe_names=[p.label for p in probes],
        times=np.asarray(record_times),
        probe_table=np.asarray(rows),
        final_state=state,
        history_times=np.asarray(hist_t) if keep else None,
        u_history=np.asarray(hist_u) if keep else None,
        v_history=np.asarray(hist_v) if keep else None,
    )


def weak_residual(times: np.ndarray, u_samples: np.ndarray, v_samples: np.ndarray,
                  f_source: Source, grid: Grid, params: ModelParams,
                  test_modes: list[tuple[int, ...]] | None = None) -> float:
    """Largest weak-form defect of a discrete trajectory over a test basis.

    The bulk equation is tested against products of low sine modes in space
    and the monomials 1, t, t^2 in time, with the same backward difference
    quotient and right endpoint quadrature the solver itself uses.  For a
    trajectory produced by the solver this is zero to linear algebra
    precision; for an injected exact trajectory it isolates the spatial
    truncation error of the stencil.
    """
    from .sources import SeparableSine

    times = np.asarray(times, dtype=np.float64)
    u_samples = np.asarray(u_samples, dtype=np.float64)
    v_samples = np.asarray(v_samples, dtype=np.float64)
    n_t = times.size
    if u_samples.shape != (n_t, grid.n_interior) or v_samples.shape != u_samples.shape:
        raise ValueError("history shapes do not match times and grid")
    if n_t < 2:
        raise ValueError("need at least two time levels")
    dt = times[1] - times[0]
    if test_modes is None:
        from itertools import product

        test_modes = [m for m in product((1, 2), repeat=grid.dim)]
    basis = np.stack([SeparableSine(modes=m)._profile(grid) for m in test_modes])
    weights = [lambda t: 1.0, lambda t: t, lambda t: t * t]

    op = StencilOperator(grid, 0.0)
    acc = np.zeros((len(weights), len(test_modes)))
    cell = float(grid.h.prod())
    for k in range(n_t - 1):
        t1 = times[k + 1]
        du = (u_samples[k + 1] - u_samples[k]) / dt
        defect = (
            params.alpha * du
            + op.apply(u_samples[k + 1])
            + params.A_strange * (u_samples[k + 1] - v_samples[k + 1])
            - f_source.value(grid, t1)
        )
        inner = cell * (basis @ defect)
        for i, eta in enumerate(weights):
            acc[i] += dt * eta(t1) * inner
    return float(np.max(np.abs(acc)))
