import mpmath
import numpy as np
import pytest

from koopnem import ConfigurationError, SimulationError
from koopnem.simulators import (
    TankSystem,
    WilliamsOttoModel,
    WilliamsOttoSystem,
    generate_tank_grid,
    generate_wo_sample,
    simulate,
    tank_step,
    two_gain_policy,
    wo_disturbance_cost_experiment,
)


@pytest.mark.parametrize("x,a", [(0.0, 0.0), (-2.0, -0.9), (1.5, 0.99), (0.3, -1.0)])
def test_tank_step_oracle(x, a):
    mpmath.mp.dps = 40
    x_m, a_m = mpmath.mpf(x), mpmath.mpf(a)
    expected = x_m + mpmath.mpf("0.2") - (11 + 7 * (1 + mpmath.mpf("0.05") ** a_m)) ** mpmath.mpf(-0.5)
    assert tank_step(x, a) == pytest.approx(float(expected), abs=1e-15)


def test_tank_origin_is_equilibrium():
    assert abs(tank_step(0.0, 0.0)) < 1e-15


def test_tank_closed_loop_is_stable():
    x0, al = np.meshgrid([-2.0, 2.0], np.linspace(-1, 1, 5), indexing="ij")
    traj = simulate(TankSystem(), x0.ravel()[:, None], al.ravel()[:, None], 200)
    mag = np.abs(traj[..., 0])
    assert np.all(np.diff(mag, axis=0) <= 1e-15)
    assert np.all(mag[-1] < 0.25 * mag[0])


def test_tank_grid():
    ds = generate_tank_grid(21, 21)
    assert ds.m == 441
    assert ds.states[:, 0].min() == -2 and ds.states[:, 0].max() == 2
    assert len(np.unique(ds.policy_params)) == 21
    with pytest.raises(ConfigurationError):
        generate_tank_grid(1, 5)


@pytest.fixture(scope="module")
def wo():
    return WilliamsOttoModel()


def test_wo_tabulated_steady_state_residual(wo):
    X = np.array(wo.tabulated_steady_state)
    resid = wo.derivatives(X, wo.F_A_ss, wo.F_B_ss) / X
    assert np.all(np.abs(resid) <= 1e-3)
    np.testing.assert_allclose(wo.steady_state, X, atol=5e-5)
    assert np.all(np.abs(wo.derivatives(wo.steady_state, wo.F_A_ss, wo.F_B_ss)) < 1e-14)


def test_wo_origin_fixed_under_zero_action(wo):
    np.testing.assert_allclose(wo.step(np.zeros(6), 0.0), 0.0, atol=1e-12)


def test_wo_rk4_converges(wo):
    x0 = np.array([0.3, -0.2, 0.5, 0.1, -0.1, 0.2])
    X0 = wo.to_physical(x0)
    ref = wo.integrate(X0, 2.0, 5.0, 20.0, substep=0.125)
    errs = [np.max(np.abs(wo.integrate(X0, 2.0, 5.0, 20.0, substep=h) - ref)) for h in (2.0, 1.0)]
    assert errs[1] < 1e-6
    assert 10 < errs[0] / errs[1] < 20  # fourth order


def test_wo_errors(wo):
    with pytest.raises(SimulationError):
        wo.step(np.zeros(6), -1.5)
    with pytest.raises(ConfigurationError):
        WilliamsOttoModel(substep=0.0)


def test_wo_policy_and_system():
    x = np.zeros((2, 6))
    x[:, 2], x[:, 5] = 1.0, 2.0
    u = two_gain_policy(x, np.array([[0.0, 0.0], [-1.0, -2.0]]))
    np.testing.assert_allclose(u, [1 + 6, 0.1 + 0.03 * 2])
    sys = WilliamsOttoSystem()
    assert sys.closed_loop_step(np.zeros((3, 6)), np.zeros((3, 2))).shape == (3, 6)


def test_wo_sample_is_deterministic():
    a = generate_wo_sample(30, 5, duration=600.0)
    b = generate_wo_sample(30, 5, duration=600.0)
    c = generate_wo_sample(30, 6, duration=600.0)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.successors, b.successors)
    assert not np.array_equal(a.states, c.states)
    assert np.all(a.policy_params >= -2) and np.all(a.policy_params <= 0)
    np.testing.assert_allclose(a.state_scales, a.states.std(axis=0, ddof=1))
    with pytest.raises(ConfigurationError):
        generate_wo_sample(1000, 0, duration=600.0)


def test_wo_disturbance_cost():
    c1 = wo_disturbance_cost_experiment(0.3, 1.0, seed=3, horizon=30)
    c2 = wo_disturbance_cost_experiment(0.3, 1.0, seed=3, horizon=30)
    assert c1 == c2 and c1 > 0
    assert wo_disturbance_cost_experiment(0.3, 1.0, seed=3, horizon=30, amplitude=0.0) == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(ConfigurationError):
        wo_disturbance_cost_experiment(-1.0, 1.0, seed=0)
