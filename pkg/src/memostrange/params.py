"""Model constants for the homogenized reaction-diffusion system.

The limit model couples a diffusing concentration u to a pointwise memory
variable v through the constants collected here:

    alpha * du/dt - Lap(u) + A * (u - v) = f
    beta  * dv/dt + mu * v = kappa * u + g

with kappa = (n-2)/C0, mu = kappa + lambda and the capacity coupling
constant A = (n-2) * C0^(n-2) * omega_n (omega_n the area of the unit
sphere in R^n).  Particles of radius a_eps = C0 * eps^gamma with
gamma = n/(n-2) are the critical scale at which this coupling survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ParamError(ValueError):
    """Raised when model constants violate their sign or range constraints."""


def unit_sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n, 2*pi^(n/2)/Gamma(n/2).

    Gamma at integer and half-integer arguments is evaluated by the exact
    recursion Gamma(x+1) = x*Gamma(x) from Gamma(1) = 1, Gamma(1/2) = sqrt(pi),
    so no general special-function routine is needed.
    """
    if n < 1:
        raise ParamError("dimension must be >= 1")
    if n % 2 == 0:
        gamma_half_n = 1.0  # Gamma(1)
        x = 1.0
    else:
        gamma_half_n = math.sqrt(math.pi)  # Gamma(1/2)
        x = 0.5
    while x < n / 2:
        gamma_half_n *= x
        x += 1.0
    return 2.0 * math.pi ** (n / 2.0) / gamma_half_n


@dataclass(frozen=True)
class ModelParams:
    """Physical constants (n, C0, lambda, alpha, beta) plus derived quantities.

    Instances are immutable; build them with :func:`derive_params` so the
    derived fields stay consistent with the raw ones.
    """

    n: int
    C0: float
    lam: float
    alpha: float
    beta: float
    gamma: float
    omega_n: float
    A_strange: float
    mu: float

    @property
    def kappa(self) -> float:
        """Memory drive coefficient (n-2)/C0."""
        return (self.n - 2) / self.C0

    def to_json(self) -> dict:
        """Flat JSON object; the reaction rate is spelled "lambda"."""
        return {
            "n": self.n,
            "C0": self.C0,
            "lambda": self.lam,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "omega_n": self.omega_n,
            "A_strange": self.A_strange,
            "mu": self.mu,
        }


def derive_params(n: int, C0: float, lam: float, alpha: float, beta: float) -> ModelParams:
    """Validate the raw constants and fill in every derived quantity."""
    problems = _raw_violations(n, C0, lam, alpha, beta)
    if problems:
        raise ParamError("; ".join(problems))
    gamma = n / (n - 2)
    omega_n = unit_sphere_area(n)
    return ModelParams(
        n=int(n),
        C0=float(C0),
        lam=float(lam),
        alpha=float(alpha),
        beta=float(beta),
        gamma=gamma,
        omega_n=omega_n,
        A_strange=(n - 2) * C0 ** (n - 2) * omega_n,
        mu=(n - 2) / C0 + lam,
    )


def params_from_json(obj: dict) -> ModelParams:
    """Rebuild ModelParams from a flat JSON object.

    Only the five raw fields are required; derived fields, if present, are
    checked against their recomputed values rather than trusted.
    """
    raw = {"n", "C0", "lambda", "alpha", "beta"}
    derived = {"gamma", "omega_n", "A_strange", "mu"}
    unknown = set(obj) - raw - derived
    if unknown:
        raise ParamError("unknown key: " + ", ".join(sorted(unknown)))
    missing = raw - set(obj)
    if missing:
        raise ParamError("missing key: " + ", ".join(sorted(missing)))
    if not isinstance(obj["n"], int) or isinstance(obj["n"], bool):
        raise ParamError("n must be an integer")
    params = derive_params(obj["n"], obj["C0"], obj["lambda"], obj["alpha"], obj["beta"])
    for key in derived & set(obj):
        expected = getattr(params, "lam" if key == "lambda" else key)
        if abs(obj[key] - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ParamError(f"inconsistent derived field {key}: "
                             f"got {obj[key]!r}, recomputed {expected!r}")
    return params


def particle_radius(params: ModelParams, eps: float) -> float:
    """Critical-scale particle radius a_eps = C0 * eps^gamma.

    The annular cell geometry needs a_eps < eps/4, i.e. the particle must fit
    strictly inside the ball of radius eps/4 around its cell center.
    """
    if eps <= 0:
        raise ParamError("eps must be positive")
    a_eps = params.C0 * eps ** params.gamma
    if not a_eps < eps / 4.0:
        raise ParamError(
            f"invalid cell geometry: a_eps = {a_eps:.6g} >= eps/4 = {eps / 4.0:.6g}"
        )
    return a_eps


def validate_params(params: ModelParams) -> list[str]:
    """Human-readable list of invariant violations; empty means valid."""
    problems = _raw_violations(params.n, params.C0, params.lam, params.alpha, params.beta)
    if not problems:
        rel = abs(params.gamma * (params.n - 2) - params.n) / params.n
        if rel > 1e-14:
            problems.append("gamma*(n-2) must equal n")
        omega = unit_sphere_area(params.n)
        if abs(params.omega_n - omega) > 1e-14 * omega:
            problems.append("omega_n inconsistent with dimension")
        expected_a = (params.n - 2) * params.C0 ** (params.n - 2) * params.omega_n
        if abs(params.A_strange - expected_a) > 1e-14 * abs(expected_a):
            problems.append("A_strange inconsistent with n, C0, omega_n")
        if abs(params.mu - ((params.n - 2) / params.C0 + params.lam)) > 1e-14 * params.mu:
            problems.append("mu inconsistent with n, C0, lambda")
    return problems


def _raw_violations(n, C0, lam, alpha, beta) -> list[str]:
    problems = []
    if n < 3:
        problems.append("n must be >= 3")
    if not C0 > 0:
        problems.append("C0 must be > 0")
    if lam < 0:
        problems.append("lambda must be >= 0")
    if alpha < 0:
        problems.append("alpha must be >= 0")
    if beta < 0:
        problems.append("beta must be >= 0")
    if alpha == 0 and beta == 0:
        problems.append("alpha and beta cannot both vanish")
    return problems
