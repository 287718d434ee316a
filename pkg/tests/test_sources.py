"""Time factors, forcing terms, and the manufactured-solution builder."""

import math

import numpy as np
import pytest

from memostrange.grid import Grid
from memostrange.params import derive_params
from memostrange.sources import (
    CallableTime,
    ConstantSource,
    ConstantTime,
    ExpRelaxTime,
    LinearTime,
    ManufacturedSource,
    PolyTime,
    SeparableSine,
    SineTime,
    Source,
    SourceError,
    TabulatedSource,
    UniformInSpace,
    manufacture_sources,
    source_from_json,
    time_factor_from_json,
)

TIME_FACTORS = [
    ConstantTime(2.5),
    LinearTime(-0.7),
    SineTime(omega=3.0, amplitude=0.4),
    ExpRelaxTime(rate=2.0, amplitude=1.3),
    PolyTime((1.0, -2.0, 0.5, 0.25)),
]


@pytest.mark.parametrize("factor", TIME_FACTORS, ids=lambda f: type(f).__name__)
def test_time_derivative_matches_difference_quotient(factor):
    delta = 1e-6
    for t in (0.0, 0.3, 1.7):
        numeric = (factor.value(t + delta) - factor.value(t - delta)) / (2 * delta)
        assert factor.deriv(t) == pytest.approx(numeric, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("factor", TIME_FACTORS, ids=lambda f: type(f).__name__)
def test_time_factor_json_round_trip(factor):
    clone = time_factor_from_json(factor.to_json())
    assert clone == factor


def test_time_factor_json_rejections():
    with pytest.raises(SourceError, match="kind"):
        time_factor_from_json({"amplitude": 1.0})
    with pytest.raises(SourceError, match="unknown time factor"):
        time_factor_from_json({"kind": "cosine"})
    with pytest.raises(SourceError, match="unknown key: omega"):
        time_factor_from_json({"kind": "linear", "omega": 2.0})


def test_callable_time_not_serializable():
    factor = CallableTime(fn=math.sin, dfn=math.cos)
    assert factor.value(0.5) == math.sin(0.5)
    assert factor.deriv(0.5) == math.cos(0.5)
    with pytest.raises(SourceError, match="not serializable"):
        factor.to_json()


def test_exp_relax_starts_at_zero_and_saturates():
    factor = ExpRelaxTime(rate=4.0, amplitude=2.0)
    assert factor.value(0.0) == 0.0
    assert factor.value(50.0) == pytest.approx(2.0)
    assert factor.deriv(0.0) == pytest.approx(8.0)


def test_separable_sine_nodal_values():
    g = Grid(dim=2, cells_per_axis=8)
    src = SeparableSine(modes=(2, 1), amplitude=1.5, time=LinearTime(2.0))
    xs, ys = g.meshgrid()
    want = 1.5 * np.sin(2 * math.pi * xs) * np.sin(math.pi * ys) * (2.0 * 0.25)
    assert np.allclose(src.value(g, 0.25), want.ravel(), atol=1e-14)
    assert np.allclose(src.dt(g, 0.25), (want / 0.25 * 1.0).ravel(), atol=1e-13)


def test_separable_sine_laplacian_against_numerical_second_differences():
    # independent check of the closed-form Laplacian at a handful of points
    g = Grid(dim=2, cells_per_axis=8)
    src = SeparableSine(modes=(1, 3), amplitude=0.8)

    def profile(x, y):
        return 0.8 * math.sin(math.pi * x) * math.sin(3 * math.pi * y)

    lap = src.laplacian(g, 0.0).reshape(g.shape)
    xs = g.axis_coords(0)
    ys = g.axis_coords(1)
    delta = 1e-4
    for i, j in [(0, 0), (3, 2), (6, 6)]:
        x, y = xs[i], ys[j]
        num = (
            profile(x + delta, y) + profile(x - delta, y)
            + profile(x, y + delta) + profile(x, y - delta)
            - 4 * profile(x, y)
        ) / delta**2
        assert lap[i, j] == pytest.approx(num, rel=1e-6)


def test_separable_sine_eigenvalue_closed_form():
    g = Grid(dim=3, cells_per_axis=8, extent=((0, 1), (0, 2), (0, 1)))
    src = SeparableSine(modes=(1, 2, 1))
    want = (math.pi) ** 2 + (2 * math.pi / 2.0) ** 2 + (math.pi) ** 2
    assert src.eigenvalue(g) == pytest.approx(want, rel=1e-14)
    assert np.allclose(src.laplacian(g, 0.0), -want * src.value(g, 0.0))


def test_separable_sine_traces_and_validation():
    assert SeparableSine(modes=(1, 1)).vanishes_on_boundary()
    assert not SeparableSine(modes=(1, 1)).initial_trace_zero()
    assert SeparableSine(modes=(1, 1), time=LinearTime(1.0)).initial_trace_zero()
    with pytest.raises(SourceError, match="mode"):
        SeparableSine(modes=(0, 1))
    g = Grid(dim=3, cells_per_axis=4)
    with pytest.raises(SourceError, match="modes"):
        SeparableSine(modes=(1, 1)).value(g, 0.0)


def test_constant_and_uniform_sources():
    g = Grid(dim=2, cells_per_axis=4)
    const = ConstantSource(3.0)
    assert np.all(const.value(g, 1.0) == 3.0)
    assert np.all(const.dt(g, 1.0) == 0.0)
    assert np.all(const.laplacian(g, 1.0) == 0.0)
    assert not const.vanishes_on_boundary()
    assert not const.initial_trace_zero()
    assert ConstantSource(0.0).initial_trace_zero()

    ramp = UniformInSpace(LinearTime(2.0))
    assert np.all(ramp.value(g, 0.5) == 1.0)
    assert np.all(ramp.dt(g, 0.5) == 2.0)
    assert ramp.initial_trace_zero()
    with pytest.raises(NotImplementedError):
        Source().value(g, 0.0)


def test_tabulated_interpolation_and_clamping():
    g = Grid(dim=1, cells_per_axis=4)
    times = np.array([0.0, 1.0, 3.0])
    samples = np.array([[0.0, 0.0, 0.0], [2.0, 4.0, 6.0], [2.0, 0.0, 2.0]])
    src = TabulatedSource(times, samples)
    assert np.allclose(src.value(g, 0.5), [1.0, 2.0, 3.0])
    assert np.allclose(src.value(g, 2.0), [2.0, 2.0, 4.0])
    # clamped outside the window, slope zero there
    assert np.allclose(src.value(g, -1.0), samples[0])
    assert np.allclose(src.value(g, 9.0), samples[-1])
    assert np.allclose(src.dt(g, 0.5), [2.0, 4.0, 6.0])
    assert np.allclose(src.dt(g, 2.0), [0.0, -2.0, -2.0])
    assert np.all(src.dt(g, 9.0) == 0.0)
    assert src.initial_trace_zero()


def test_tabulated_validation():
    with pytest.raises(SourceError, match="increasing"):
        TabulatedSource(np.array([0.0, 0.0]), np.zeros((2, 3)))
    with pytest.raises(SourceError, match="row per time"):
        TabulatedSource(np.array([0.0, 1.0]), np.zeros((3, 3)))
    with pytest.raises(SourceError, match="nonempty"):
        TabulatedSource(np.array([]), np.zeros((0, 3)))
    g = Grid(dim=2, cells_per_axis=4)
    src = TabulatedSource.constant_in_time(np.arange(5.0))
    with pytest.raises(SourceError, match="grid"):
        src.value(g, 0.0)


def test_tabulated_constant_in_time():
    g = Grid(dim=1, cells_per_axis=6)
    src = TabulatedSource.constant_in_time(np.arange(5.0))
    assert np.allclose(src.value(g, 0.0), src.value(g, 7.3))
    assert np.all(src.dt(g, 0.2) == 0.0)


def test_manufactured_g_vanishes_for_exact_memory_response():
    # if v is the exact relaxation response to u = t * S, the g forcing is zero
    params = derive_params(n=3, C0=1.0, lam=1.0, alpha=1.0, beta=0.5)
    mu, kappa, beta = params.mu, params.kappa, params.beta

    def v_time(t):
        return kappa * (t / mu - (beta / mu**2) * -math.expm1(-mu * t / beta))

    def v_rate(t):
        return (kappa / mu) * -math.expm1(-mu * t / beta)

    u_spec = SeparableSine(modes=(1, 1, 1), time=LinearTime(1.0))
    v_spec = SeparableSine(modes=(1, 1, 1), time=CallableTime(v_time, v_rate))
    _, g_src = manufacture_sources(u_spec, v_spec, params)
    grid = Grid(dim=3, cells_per_axis=6)
    for t in (0.0, 0.4, 1.1):
        assert np.max(np.abs(g_src.value(grid, t))) < 1e-13


def test_manufactured_f_matches_hand_assembly():
    params = derive_params(n=4, C0=0.8, lam=0.5, alpha=2.0, beta=1.0)
    u_spec = SeparableSine(modes=(2, 1, 1, 1), time=SineTime(omega=1.5))
    v_spec = SeparableSine(modes=(1, 1, 1, 1), time=ExpRelaxTime(1.0))
    f_src, g_src = manufacture_sources(u_spec, v_spec, params)
    g = Grid(dim=4, cells_per_axis=4)
    t = 0.7
    f_want = (
        params.alpha * u_spec.dt(g, t)
        - u_spec.laplacian(g, t)
        + params.A_strange * (u_spec.value(g, t) - v_spec.value(g, t))
    )
    g_want = (
        params.beta * v_spec.dt(g, t)
        + params.mu * v_spec.value(g, t)
        - params.kappa * u_spec.value(g, t)
    )
    assert np.allclose(f_src.value(g, t), f_want)
    assert np.allclose(g_src.value(g, t), g_want)


def test_manufacture_rejects_bad_traces():
    params = derive_params(n=3, C0=1.0, lam=1.0, alpha=1.0, beta=1.0)
    good_u = SeparableSine(modes=(1, 1, 1), time=LinearTime(1.0))
    good_v = SeparableSine(modes=(1, 1, 1), time=ExpRelaxTime(1.0))
    with pytest.raises(SourceError, match="boundary"):
        manufacture_sources(UniformInSpace(LinearTime(1.0)), good_v, params)
    with pytest.raises(SourceError, match="u target must vanish at t = 0"):
        manufacture_sources(SeparableSine(modes=(1, 1, 1)), good_v, params)
    with pytest.raises(SourceError, match="v target must vanish at t = 0"):
        manufacture_sources(good_u, SeparableSine(modes=(1, 1, 1)), params)
    # both violations reported together
    with pytest.raises(SourceError, match="boundary.*t = 0"):
        manufacture_sources(UniformInSpace(ConstantTime(1.0)), good_v, params)
    # degenerate coefficients lift the matching initial constraint
    relaxed = derive_params(n=3, C0=1.0, lam=1.0, alpha=0.0, beta=1.0)
    manufacture_sources(SeparableSine(modes=(1, 1, 1)), good_v, relaxed)
    with pytest.raises(SourceError, match="role"):
        ManufacturedSource("q", good_u, good_v, params)


SERIALIZABLE = [
    ConstantSource(1.25),
    SeparableSine(modes=(2, 1), amplitude=0.5, time=SineTime(omega=2.0)),
    UniformInSpace(ExpRelaxTime(rate=3.0)),
]


@pytest.mark.parametrize("src", SERIALIZABLE, ids=lambda s: type(s).__name__)
def test_source_json_round_trip(src):
    assert source_from_json(src.to_json()) == src


def test_tabulated_json_round_trip():
    src = TabulatedSource(np.array([0.0, 1.0]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    clone = source_from_json(src.to_json())
    assert np.array_equal(clone.times, src.times)
    assert np.array_equal(clone.samples, src.samples)


def test_manufactured_json_round_trip_needs_params():
    params = derive_params(n=3, C0=1.0, lam=1.0, alpha=1.0, beta=1.0)
    u_spec = SeparableSine(modes=(1, 1, 1), time=LinearTime(1.0))
    v_spec = SeparableSine(modes=(1, 1, 1), time=ExpRelaxTime(1.0))
    f_src, _ = manufacture_sources(u_spec, v_spec, params)
    clone = source_from_json(f_src.to_json(), params)
    assert clone == f_src
    with pytest.raises(SourceError, match="params"):
        source_from_json(f_src.to_json())


def test_source_json_rejections():
    with pytest.raises(SourceError, match="kind"):
        source_from_json({"amplitude": 1.0})
    with pytest.raises(SourceError, match="unknown source kind"):
        source_from_json({"kind": "gaussian"})
    with pytest.raises(SourceError, match="unknown key: rate"):
        source_from_json({"kind": "constant", "rate": 1.0})
    with pytest.raises(SourceError, match="unknown key: phase"):
        source_from_json({"kind": "separable-sine", "modes": [1, 1], "phase": 0.0})
