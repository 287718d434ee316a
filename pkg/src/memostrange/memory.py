"""Pointwise memory variable v driven by the concentration u.

At every spatial point v relaxes toward the current drive D = kappa*u + g:

    beta * dv/dt + mu * v = D,    v(0) = 0,

equivalently, for beta > 0, the convolution

    v(t) = (1/beta) * integral_0^t D(s) * exp(-mu*(t-s)/beta) ds.

For beta = 0 the equation degenerates to the algebraic relation v = D / mu,
which also gives the closed form H = u - v = (lambda*u - g) / mu.

Every discretization used here is a constant-coefficient two-tap recurrence

    v[k+1] = a * v[k] + w1 * D[k+1] + w0 * D[k]

and long scans of it run through the kernels module.  Backward Euler and the
trapezoid rule discretize the ODE; the reference quadrature integrates the
convolution with the kernel handled exactly and D interpolated linearly on
each step (exponential integrator weights), so its error is independent of
the ODE schemes it is used to judge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .params import ModelParams

SCHEMES = ("backward-euler", "trapezoid")


@dataclass(frozen=True)
class MemoryState:
    """Memory values, the drive sample they were last advanced with, and time."""

    v: np.ndarray
    drive: np.ndarray
    t: float

    @classmethod
    def initial(cls, v0, drive0, t: float = 0.0) -> "MemoryState":
        v0 = np.atleast_1d(np.asarray(v0, dtype=np.float64))
        drive0 = np.broadcast_to(np.asarray(drive0, dtype=np.float64), v0.shape).copy()
        return cls(v=v0, drive=drive0, t=t)


def h_algebraic(u, g, params: ModelParams):
    """Instantaneous limit H = (lambda*u - g)/mu, valid on the beta = 0 branch."""
    if params.beta != 0.0:
        raise ValueError("h_algebraic applies only when beta = 0")
    return (params.lam * np.asarray(u) - np.asarray(g)) / params.mu


def h_from_state(u, state: MemoryState):
    """Difference H = u - v that feeds the reaction term."""
    return np.asarray(u) - state.v


def scheme_taps(params: ModelParams, dt: float, scheme: str) -> tuple[float, float, float]:
    """Recurrence coefficients (a, w1, w0) for one memory step of size dt."""
    beta, mu = params.beta, params.mu
    if beta <= 0.0:
        raise ValueError("recurrence schemes need beta > 0")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if scheme == "backward-euler":
        denom = beta + mu * dt
        return beta / denom, dt / denom, 0.0
    if scheme == "trapezoid":
        denom = beta + 0.5 * mu * dt
        return (beta - 0.5 * mu * dt) / denom, 0.5 * dt / denom, 0.5 * dt / denom
    if scheme == "exp":
        decay, w1, w0 = _exp_weights(mu / beta, dt)
        return decay, w1 / beta, w0 / beta
    raise ValueError(f"unknown scheme {scheme!r}")


def _exp_weights(c: float, dt: float) -> tuple[float, float, float]:
    """Exact weights for integrating a linear interpolant against exp(-c*tau).

    Returns (exp(-c*dt), w_new, w_old) with

        integral_0^dt D(t-tau) exp(-c*tau) dtau = w_new*D(t) + w_old*D(t-dt)

    for D linear on the step.  For small c*dt the closed forms lose digits to
    cancellation, so a short alternating series takes over there.
    """
    x = c * dt
    decay = math.exp(-x)
    if x < 0.5:
        # sum_new = sum (-x)^m / (m! (m+1)(m+2)),  sum_old = sum (-x)^m / (m! (m+2))
        term = 1.0
        sum_new = 0.0
        sum_old = 0.0
        m = 0
        while abs(term) > 1e-19:
            sum_new += term / ((m + 1) * (m + 2))
            sum_old += term / (m + 2)
            m += 1
            term *= -x / m
        return decay, dt * sum_new, dt * sum_old
    p0 = (1.0 - decay) / c
    p1 = (1.0 - decay * (1.0 + x)) / (c * c)
    return decay, p0 - p1 / dt, p1 / dt


def step_memory(state: MemoryState, u_new, g_new, dt: float, params: ModelParams,
                scheme: str = "backward-euler") -> MemoryState:
    """Advance the memory variable one step given the new u and g samples."""
    drive_new = params.kappa * np.asarray(u_new, dtype=np.float64) + np.asarray(g_new, dtype=np.float64)
    drive_new = np.broadcast_to(drive_new, state.v.shape).astype(np.float64, copy=True)
    if params.beta == 0.0:
        return MemoryState(v=drive_new / params.mu, drive=drive_new, t=state.t + dt)
    a, w1, w0 = scheme_taps(params, dt, scheme)
    v_new = a * state.v + w1 * drive_new + w0 * state.drive
    return MemoryState(v=v_new, drive=drive_new, t=state.t + dt)


def memory_trajectory(drive_samples: np.ndarray, dt: float, params: ModelParams,
                      scheme: str, v0=0.0) -> np.ndarray:
    """Run a whole recurrence scan over uniformly spaced drive samples.

    drive_samples has time leading, one row per sample starting at t = 0.
    Identical arithmetic to iterating step_memory, in kernel form so million
    step scans stay cheap.
    """
    drive_samples = np.asarray(drive_samples, dtype=np.float64)
    if params.beta == 0.0:
        return drive_samples / params.mu
    a, w1, w0 = scheme_taps(params, dt, scheme)
    flat = drive_samples.reshape(drive_samples.shape[0], -1)
    y0 = np.broadcast_to(np.asarray(v0, dtype=np.float64).ravel() if np.ndim(v0) else np.float64(v0),
                         flat.shape[1:])
    out = kernels.recurrence_scan(a, w1, w0, flat, y0)
    return out.reshape(drive_samples.shape)


def _resample_linear(samples: np.ndarray, n_intervals: int) -> np.ndarray:
    """Linear interpolation of uniformly spaced samples onto a finer uniform grid."""
    k = samples.shape[0] - 1
    pos = np.linspace(0.0, k, n_intervals + 1)
    i0 = np.minimum(pos.astype(np.int64), k - 1)
    frac = (pos - i0).reshape((-1,) + (1,) * (samples.ndim - 1))
    return samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac


def convolution_reference(u_history, g_history, t: float, params: ModelParams,
                          quad_points: int | None = None) -> np.ndarray:
    """High-accuracy memory value at time t from uniform input histories.

    Integrates the convolution form directly: the exponential kernel is
    handled in closed form on each quadrature step and the drive is taken
    piecewise linear between samples.  quad_points, if given, resamples the
    inputs onto that many intervals first (refinement beyond the input
    resolution cannot add information, but aligns step counts in studies).
    """
    if params.beta == 0.0:
        u_last = np.asarray(u_history, dtype=np.float64)[-1]
        g_last = np.asarray(g_history, dtype=np.float64)[-1]
        return (params.kappa * u_last + g_last) / params.mu
    if t <= 0.0:
        raise ValueError("t must be positive")
    u_history = np.asarray(u_history, dtype=np.float64)
    g_history = np.asarray(g_history, dtype=np.float64)
    if u_history.shape != g_history.shape:
        raise ValueError("u and g histories must share a shape")
    if u_history.shape[0] < 2:
        raise ValueError("histories need at least two samples")
    drive = params.kappa * u_history + g_history
    n_steps = drive.shape[0] - 1
    if quad_points is not None and quad_points != n_steps:
        if quad_points < 1:
            raise ValueError("quad_points must be >= 1")
        drive = _resample_linear(drive, quad_points)
        n_steps = quad_points
    traj = memory_trajectory(drive, t / n_steps, params, "exp")
    return traj[-1]


def convolution_trajectory(u_history, g_history, t: float, params: ModelParams) -> np.ndarray:
    """Reference memory values at every history sample time, not just at t."""
    u_history = np.asarray(u_history, dtype=np.float64)
    g_history = np.asarray(g_history, dtype=np.float64)
    drive = params.kappa * u_history + g_history
    if params.beta == 0.0:
        return drive / params.mu
    n_steps = drive.shape[0] - 1
    return memory_trajectory(drive, t / n_steps, params, "exp")


def stability_bound_check(phi_history, g_history, params: ModelParams,
                          dt: float) -> tuple[float, float, bool]:
    """Check the a priori bound on H for an arbitrary input pair (phi, g).

    H is phi minus the memory response to (phi, g), evaluated with the
    reference quadrature.  The bound compares the space-time L2 norm of H
    against C * (||phi|| + ||dphi/dt|| + ||g||) with the calibrated constant
    C = 4 * max(1, 1/mu, beta/mu); the Young inequality argument for the
    convolution gives 2 * max(1, 1/mu), so the extra factor covers the
    discrete quadrature of the norms.
    """
    phi = np.atleast_1d(np.asarray(phi_history, dtype=np.float64))
    g = np.atleast_1d(np.asarray(g_history, dtype=np.float64))
    if phi.shape != g.shape:
        raise ValueError("phi and g histories must share a shape")
    if phi.shape[0] < 2:
        raise ValueError("histories need at least two samples")
    if params.beta == 0.0:
        h_vals = (params.lam * phi - g) / params.mu
    else:
        drive = params.kappa * phi + g
        v = memory_trajectory(drive, dt, params, "exp")
        h_vals = phi - v

    space_axes = tuple(range(1, phi.ndim))

    def qt_norm(x):
        sq = np.sum(x * x, axis=space_axes) if space_axes else x * x
        return math.sqrt(np.trapezoid(sq, dx=dt))

    dphi = np.diff(phi, axis=0) / dt
    sq = np.sum(dphi * dphi, axis=space_axes) if space_axes else dphi * dphi
    dphi_norm = math.sqrt(float(np.sum(sq)) * dt)

    lhs = qt_norm(h_vals)
    c_cal = 4.0 * max(1.0, 1.0 / params.mu, params.beta / params.mu)
    rhs = c_cal * (qt_norm(phi) + dphi_norm + qt_norm(g))
    return lhs, rhs, bool(lhs <= rhs)
