import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve

from observerlab.numerics import ConfigurationError, IntegrationError
from observerlab.plants import (
    CascadeSpec,
    ControlSchedule,
    CukController,
    CukParams,
    DomainError,
    acad3_equilibrium,
    acad3_field,
    acad3_plant,
    cascade_build,
    cuk_control,
    cuk_equilibrium,
    cuk_field,
    cuk_plant,
    demo_cascade_plant,
    demo_cascade_spec,
)
from observerlab.harness.simulation import simulate


# -- Cuk converter ----------------------------------------------------------


def test_cuk_default_parameters():
    p = CukParams()
    assert (p.L1, p.C2, p.C4, p.G, p.E) == (0.01, 2.2e-5, 2.29e-5, 0.0447, 12.0)


def test_cuk_equilibrium_hand_values():
    p = CukParams()
    x1, x2, y1, y2 = 0.5364, -12.0, 24.0, -0.5364
    xd, yd = cuk_field((x1, x2), (y1, y2), 0.5, p)
    assert np.max(np.abs(np.concatenate((xd, yd)))) < 1e-12
    assert np.allclose(cuk_equilibrium(0.5, p), [x1, x2, y1, y2], atol=1e-12)


@pytest.mark.parametrize("u", [0.2, 0.5, 0.625, 0.8])
def test_cuk_equilibrium_matches_newton_oracle(u):
    p = CukParams()
    f = cuk_plant(p).field
    guess = np.array([0.5, -10.0, 20.0, -0.5]) * np.array([1.0, u / 0.5, 1.0 / (2.0 * (1.0 - u)), u / 0.5])
    root = fsolve(lambda s: f(s, u) * np.array([p.L1, p.C4, p.C2, p.L3]), guess, xtol=1e-14)
    assert np.allclose(cuk_equilibrium(u, p), root, rtol=1e-9, atol=1e-9)


def test_cuk_unforced_origin():
    p = CukParams(E=1e-300)
    xd, yd = cuk_field((0.0, 0.0), (0.0, 0.0), 0.3, p)
    assert np.max(np.abs(np.concatenate((xd, yd)))) < 1e-290


def test_cuk_rejects_duty_outside_unit_interval():
    for u in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            cuk_field((0, 0), (0, 0), u, CukParams())


def test_cuk_parameters_must_be_positive():
    with pytest.raises(ConfigurationError):
        CukParams(L1=0.0)


def test_cuk_plant_field_matches_split_form():
    p = CukParams()
    plant = cuk_plant(p)
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = rng.uniform(plant.state_box[:, 0], plant.state_box[:, 1])
        u = rng.uniform(0.05, 0.95)
        xd, yd = cuk_field(s[:2], s[2:], u, p)
        full = plant.field(s, u)
        assert np.allclose(full, np.concatenate((xd, yd)), rtol=1e-14, atol=0)
        assert np.allclose(full, plant.drift(s) + plant.input_field(s) * u, rtol=1e-12, atol=1e-6)


def test_control_first_term_only():
    p = CukParams()
    x = np.array([0.3, -5.0, 10.0, 0.1])
    assert cuk_control(x, 0.0, ControlSchedule(((0.0, -12.0),), lambda_c=0.0), p) == pytest.approx(0.5)
    assert cuk_control(x, 0.0, ControlSchedule(((0.0, -24.0),), lambda_c=0.0), p) == pytest.approx(2.0 / 3.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4), st.floats(0, 2.0), st.floats(0.0, 1.19))
def test_control_correction_is_bounded(x, lam, t):
    p = CukParams()
    sched = ControlSchedule(lambda_c=lam, u_clamp=(1e-6, 1 - 1e-6))
    vd = abs(sched.vd(t))
    u = cuk_control(np.array(x), t, sched, p)
    assert abs(u - vd / (vd + p.E)) <= lam / 2 + 1e-12


def test_control_clamps():
    p = CukParams()
    sched = ControlSchedule(((0.0, -1e6),), lambda_c=0.0, u_clamp=(0.05, 0.95))
    assert cuk_control(np.zeros(4), 0.0, sched, p) == 0.95


def test_schedule_switches_every_two_tenths():
    s = ControlSchedule()
    assert [s.vd(t) for t in (0.0, 0.19, 0.2, 0.39, 0.4, 0.6, 0.8, 1.0, 1.19)] == \
        [-15, -15, -25, -25, -15, -25, -15, -25, -25]


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        ControlSchedule(((0.1, -15.0),))
    with pytest.raises(ConfigurationError):
        ControlSchedule(((0.0, -15.0), (0.0, -25.0)))
    with pytest.raises(ConfigurationError):
        ControlSchedule(u_clamp=(0.0, 0.9))


def test_cuk_closed_loop_stays_bounded():
    p = CukParams()
    plant = cuk_plant(p)
    ctrl = CukController(ControlSchedule(), p)
    res = simulate(plant, [], ctrl, 1e-5, 1.2, decimation=100)
    assert res.ok
    x = res.traces["plant"].x
    eq = np.max([np.abs(cuk_equilibrium(v / (v + p.E), p)) for v in (15.0, 25.0)], axis=0)
    assert np.all(np.max(np.abs(x), axis=0) <= 10.0 * eq)


# -- academic system --------------------------------------------------------


def test_acad3_origin():
    assert np.array_equal(acad3_field(np.zeros(3), 0.0), [1.0, 0.0, 1.0])


def test_acad3_equilibrium_matches_newton_oracle():
    r = 0.5
    for _ in range(50):
        r -= (r ** 3 + r - 1.0) / (3 * r * r + 1.0)
    eq = acad3_equilibrium(-1.0)
    assert eq[0] == pytest.approx(r, abs=1e-12)
    assert eq[0] == pytest.approx(0.682328, abs=1e-6)
    assert eq[1] == pytest.approx(r * r + math.sin(r), abs=1e-12)
    assert eq[2] == pytest.approx(3.0 * math.log(r), abs=1e-12)
    assert np.max(np.abs(acad3_field(eq, -1.0))) < 1e-9


def test_acad3_equilibrium_is_locally_stable():
    from observerlab.numerics import fd_jacobian
    eq = acad3_equilibrium(-1.0)
    J = fd_jacobian(lambda x: acad3_field(x, -1.0), eq)
    assert np.all(np.linalg.eigvals(J).real < 0)
    res = simulate(acad3_plant(eq + [0.2, -0.3, 0.25]), [], lambda t, x: -1.0, 1e-3, 30.0, decimation=100)
    assert np.max(np.abs(res.traces["plant"].x[-1] - eq)) < 1e-3


def test_acad3_x2_subsystem_rate():
    # frozen x1 -> x2 relaxes to x1^2 + sin x1 at rate 1
    x = np.array([0.5, 3.0, 0.0])
    target = 0.25 + math.sin(0.5)
    assert acad3_field(x, 0.0)[1] == pytest.approx(-(3.0 - target))


def test_acad3_overflow_is_an_integration_error():
    with pytest.raises(IntegrationError):
        acad3_field(np.array([0.0, 0.0, 1e4]), 0.0)


def test_acad3_equilibrium_needs_negative_input():
    with pytest.raises(DomainError):
        acad3_equilibrium(0.5)


# -- cascade ----------------------------------------------------------------


def test_cascade_rejects_non_hurwitz_block():
    spec = demo_cascade_spec()
    bad = CascadeSpec(**{**spec.__dict__, "A2": np.array([[1.0]])})
    with pytest.raises(ConfigurationError, match="eigenvalue"):
        cascade_build(bad)


def test_cascade_warns_on_vanishing_regressor():
    spec = demo_cascade_spec(b_scale=0.0)
    with pytest.warns(RuntimeWarning):
        cascade_build(spec)


def test_cascade_demo_builds_quietly_and_is_bounded():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        plant = demo_cascade_plant()
    from observerlab.plants import SineInput
    res = simulate(plant, [], SineInput(), 1e-3, 30.0, decimation=100)
    assert res.ok
    assert np.max(np.abs(res.traces["plant"].x)) < 10.0


def test_cascade_field_structure():
    plant = demo_cascade_plant()
    x = np.array([0.3, -0.2, 0.4, 1.5])
    u = 0.7
    f = plant.field(x, u)
    assert f[0] == pytest.approx(-0.3 + (1 + math.sin(u) ** 2) * 1.5)
    assert f[1] == pytest.approx(0.2 + 0.3)
    assert f[2] == pytest.approx(-0.8 + 0.3 - 0.2)
    assert f[3] == pytest.approx(math.sin(u))
    assert plant.output_index == (0,)


def test_cascade_k_must_index_first_block():
    spec = demo_cascade_spec()
    with pytest.raises(ConfigurationError):
        cascade_build(CascadeSpec(**{**spec.__dict__, "k": 1}))
