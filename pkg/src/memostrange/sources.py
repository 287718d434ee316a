"""Forcing terms and closed-form trajectories, sharing one evaluation API.

A source knows its value on a grid at a time, its time derivative, and
(when it has one) its Laplacian.  That is exactly the interface a
manufactured exact solution needs too, so study code passes the same
objects around for both roles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .params import ModelParams


class SourceError(ValueError):
    """Raised for malformed source descriptions or incompatible traces."""


# ---------------------------------------------------------------------------
# scalar time factors


class TimeFactor:
    def value(self, t: float) -> float:
        raise NotImplementedError

    def deriv(self, t: float) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise SourceError(f"{type(self).__name__} is not serializable")


@dataclass(frozen=True)
class ConstantTime(TimeFactor):
    amplitude: float = 1.0

    def value(self, t):
        return self.amplitude

    def deriv(self, t):
        return 0.0

    def to_json(self):
        return {"kind": "constant", "amplitude": self.amplitude}


@dataclass(frozen=True)
class LinearTime(TimeFactor):
    rate: float = 1.0

    def value(self, t):
        return self.rate * t

    def deriv(self, t):
        return self.rate

    def to_json(self):
        return {"kind": "linear", "rate": self.rate}


@dataclass(frozen=True)
class SineTime(TimeFactor):
    omega: float
    amplitude: float = 1.0

    def value(self, t):
        return self.amplitude * math.sin(self.omega * t)

    def deriv(self, t):
        return self.amplitude * self.omega * math.cos(self.omega * t)

    def to_json(self):
        return {"kind": "sine", "omega": self.omega, "amplitude": self.amplitude}


@dataclass(frozen=True)
class ExpRelaxTime(TimeFactor):
    """Saturating ramp amplitude * (1 - exp(-rate * t)), zero at t = 0."""

    rate: float
    amplitude: float = 1.0

    def value(self, t):
        return self.amplitude * -math.expm1(-self.rate * t)

    def deriv(self, t):
        return self.amplitude * self.rate * math.exp(-self.rate * t)

    def to_json(self):
        return {"kind": "exp-relax", "rate": self.rate, "amplitude": self.amplitude}


@dataclass(frozen=True)
class PolyTime(TimeFactor):
    coeffs: tuple[float, ...]

    def value(self, t):
        return sum(c * t**k for k, c in enumerate(self.coeffs))

    def deriv(self, t):
        return sum(k * c * t ** (k - 1) for k, c in enumerate(self.coeffs) if k > 0)

    def to_json(self):
        return {"kind": "poly", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class CallableTime(TimeFactor):
    """Arbitrary python time factor for in-process studies, not serializable."""

    fn: object
    dfn: object

    def value(self, t):
        return self.fn(t)

    def deriv(self, t):
        return self.dfn(t)


_TIME_KINDS = {
    "constant": (ConstantTime, ("amplitude",)),
    "linear": (LinearTime, ("rate",)),
    "sine": (SineTime, ("omega", "amplitude")),
    "exp-relax": (ExpRelaxTime, ("rate", "amplitude")),
    "poly": (PolyTime, ("coeffs",)),
}


def time_factor_from_json(obj) -> TimeFactor:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SourceError("time factor must be an object with a 'kind'")
    kind = obj["kind"]
    if kind not in _TIME_KINDS:
        raise SourceError(f"unknown time factor kind {kind!r}")
    cls, names = _TIME_KINDS[kind]
    unknown = set(obj) - {"kind"} - set(names)
    if unknown:
        raise SourceError("unknown key: " + ", ".join(sorted(unknown)))
    kwargs = {k: obj[k] for k in names if k in obj}
    if kind == "poly":
        kwargs["coeffs"] = tuple(float(c) for c in kwargs.get("coeffs", ()))
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# sources


class Source:
    def value(self, grid: Grid, t: float) -> np.ndarray:
        raise NotImplementedError

    def dt(self, grid: Grid, t: float) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, grid: Grid, t: float) -> np.ndarray:
        raise SourceError(f"{type(self).__name__} has no closed-form Laplacian")

    def vanishes_on_boundary(self) -> bool:
        return False

    def initial_trace_zero(self) -> bool:
        return False

    def to_json(self) -> dict:
        raise SourceError(f"{type(self).__name__} is not serializable")


@dataclass(frozen=True)
class ConstantSource(Source):
    """Uniform in space and time."""

    amplitude: float

    def value(self, grid, t):
        return np.full(grid.n_interior, float(self.amplitude))

    def dt(self, grid, t):
        return np.zeros(grid.n_interior)

    def laplacian(self, grid, t):
        return np.zeros(grid.n_interior)

    def vanishes_on_boundary(self):
        return self.amplitude == 0.0

    def initial_trace_zero(self):
        return self.amplitude == 0.0

    def to_json(self):
        return {"kind": "constant", "amplitude": self.amplitude}


@dataclass(frozen=True)
class SeparableSine(Source):
    """Product of axis sine modes times a scalar time factor.

    The spatial profile is prod_i sin(m_i * pi * (x_i - lo_i) / L_i), an
    eigenfunction of the Laplacian on the box that vanishes on the boundary.
    """

    modes: tuple[int, ...]
    amplitude: float = 1.0
    time: TimeFactor = field(default_factory=ConstantTime)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if any(m < 1 for m in self.modes):
            raise SourceError("mode numbers must be >= 1")

    def _profile(self, grid: Grid) -> np.ndarray:
        if grid.dim != len(self.modes):
            raise SourceError(f"{len(self.modes)} modes on a {grid.dim}d grid")
        out = np.array(self.amplitude)
        for ax in range(grid.dim):
            lo, hi = grid.extent[ax]
            x = grid.axis_coords(ax)
            s = np.sin(self.modes[ax] * math.pi * (x - lo) / (hi - lo))
            out = np.multiply.outer(out, s)
        return out.ravel()

    def eigenvalue(self, grid: Grid) -> float:
        """Continuum Dirichlet eigenvalue: -Lap(profile) = eigenvalue * profile."""
        return sum(
            (m * math.pi / (hi - lo)) ** 2 for m, (lo, hi) in zip(self.modes, grid.extent)
        )

    def value(self, grid, t):
        return self._profile(grid) * self.time.value(t)

    def dt(self, grid, t):
        return self._profile(grid) * self.time.deriv(t)

    def laplacian(self, grid, t):
        return self.value(grid, t) * -self.eigenvalue(grid)

    def vanishes_on_boundary(self):
        return True

    def initial_trace_zero(self):
        return self.amplitude == 0.0 or self.time.value(0.0) == 0.0

    def to_json(self):
        return {
            "kind": "separable-sine",
            "modes": list(self.modes),
            "amplitude": self.amplitude,
            "time": self.time.to_json(),
        }


@dataclass(frozen=True)
class UniformInSpace(Source):
    """Spatially uniform source carrying an arbitrary time factor."""

    time: TimeFactor

    def value(self, grid, t):
        return np.full(grid.n_interior, self.time.value(t))

    def dt(self, grid, t):
        return np.full(grid.n_interior, self.time.deriv(t))

    def laplacian(self, grid, t):
        return np.zeros(grid.n_interior)

    def initial_trace_zero(self):
        return self.time.value(0.0) == 0.0

    def to_json(self):
        return {"kind": "uniform", "time": self.time.to_json()}


@dataclass(frozen=True, eq=False)
class TabulatedSource(Source):
    """Piecewise-linear-in-time interpolation of sampled interior fields.

    Outside the sampled window the nearest endpoint row is held constant.
    """

    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        samples = np.asarray(self.samples, dtype=np.float64)
        if times.ndim != 1 or times.size < 1:
            raise SourceError("times must be a nonempty 1d array")
        if samples.ndim != 2 or samples.shape[0] != times.size:
            raise SourceError("samples must have one row per time")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise SourceError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def constant_in_time(cls, values: np.ndarray) -> "TabulatedSource":
        values = np.asarray(values, dtype=np.float64).ravel()
        return cls(times=np.array([0.0]), samples=values[None, :])

    def _check(self, grid):
        if self.samples.shape[1] != grid.n_interior:
            raise SourceError("tabulated samples do not match the grid")

    def value(self, grid, t):
        self._check(grid)
        times, samples = self.times, self.samples
        if times.size == 1 or t <= times[0]:
            return samples[0].copy() if t <= times[0] else samples[-1].copy()
        if t >= times[-1]:
            return samples[-1].copy()
        i = int(np.searchsorted(times, t, side="right") - 1)
        frac = (t - times[i]) / (times[i + 1] - times[i])
        return samples[i] * (1.0 - frac) + samples[i + 1] * frac

    def dt(self, grid, t):
        self._check(grid)
        times, samples = self.times, self.samples
        if times.size == 1 or t < times[0] or t > times[-1]:
            return np.zeros(grid.n_interior)
        i = min(int(np.searchsorted(times, t, side="right") - 1), times.size - 2)
        return (samples[i + 1] - samples[i]) / (times[i + 1] - times[i])

    def initial_trace_zero(self):
        return bool(np.all(self.samples[0] == 0.0))

    def to_json(self):
        return {"kind": "tabulated", "times": self.times.tolist(), "samples": self.samples.tolist()}


@dataclass(frozen=True)
class ManufacturedSource(Source):
    """Forcing that makes a chosen (u, v) pair solve the coupled system.

    role "f" gives alpha*du/dt - Lap(u) + A*(u - v) and role "g" gives
    beta*dv/dt + mu*v - kappa*u, both evaluated from the closed forms of the
    target trajectories.
    """

    role: str
    u_spec: Source
    v_spec: Source
    params: ModelParams

    def __post_init__(self):
        if self.role not in ("f", "g"):
            raise SourceError("role must be 'f' or 'g'")

    def value(self, grid, t):
        p = self.params
        if self.role == "f":
            return (
                p.alpha * self.u_spec.dt(grid, t)
                - self.u_spec.laplacian(grid, t)
                + p.A_strange * (self.u_spec.value(grid, t) - self.v_spec.value(grid, t))
            )
        return (
            p.beta * self.v_spec.dt(grid, t)
            + p.mu * self.v_spec.value(grid, t)
            - p.kappa * self.u_spec.value(grid, t)
        )

    def to_json(self):
        return {
            "kind": "manufactured",
            "role": self.role,
            "u": self.u_spec.to_json(),
            "v": self.v_spec.to_json(),
        }


def manufacture_sources(u_spec: Source, v_spec: Source,
                        params: ModelParams) -> tuple[ManufacturedSource, ManufacturedSource]:
    """Build the (f, g) pair whose exact solution is (u_spec, v_spec).

    Rejects target trajectories that violate the boundary condition on u or
    the zero initial conditions that apply whenever the corresponding time
    derivative is actually present in the system.
    """
    problems = []
    if not u_spec.vanishes_on_boundary():
        problems.append("u target must vanish on the boundary")
    if params.alpha > 0 and not u_spec.initial_trace_zero():
        problems.append("u target must vanish at t = 0 when alpha > 0")
    if params.beta > 0 and not v_spec.initial_trace_zero():
        problems.append("v target must vanish at t = 0 when beta > 0")
    if problems:
        raise SourceError("; ".join(problems))
    return (
        ManufacturedSource("f", u_spec, v_spec, params),
        ManufacturedSource("g", u_spec, v_spec, params),
    )


_SOURCE_KINDS = ("constant", "separable-sine", "uniform", "tabulated", "manufactured")


def source_from_json(obj, params: ModelParams | None = None) -> Source:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SourceError("source must be an object with a 'kind'")
    kind = obj["kind"]
    if kind not in _SOURCE_KINDS:
        raise SourceError(f"unknown source kind {kind!r}")
    body = {k: v for k, v in obj.items() if k != "kind"}

    def need(keys):
        unknown = set(body) - set(keys)
        if unknown:
            raise SourceError("unknown key: " + ", ".join(sorted(unknown)))

    if kind == "constant":
        need(["amplitude"])
        return ConstantSource(float(body.get("amplitude", 0.0)))
    if kind == "separable-sine":
        need(["modes", "amplitude", "time"])
        time = time_factor_from_json(body["time"]) if "time" in body else ConstantTime()
        return SeparableSine(
            modes=tuple(body.get("modes", ())),
            amplitude=float(body.get("amplitude", 1.0)),
            time=time,
        )
    if kind == "uniform":
        need(["time"])
        return UniformInSpace(time_factor_from_json(body["time"]))
    if kind == "tabulated":
        need(["times", "samples"])
        return TabulatedSource(np.asarray(body["times"]), np.asarray(body["samples"]))
    need(["role", "u", "v"])
    if params is None:
        raise SourceError("manufactured sources need model params")
    return ManufacturedSource(
        role=body.get("role", ""),
        u_spec=source_from_json(body["u"], params),
        v_spec=source_from_json(body["v"], params),
        params=params,
    )
