import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopnem import FitError, InputError
from koopnem.cost import (
    CostSpec,
    actual_cost,
    actual_costs,
    cost_bound,
    cost_bound_cap,
    cost_bound_limit,
    cost_surface,
    interpolate_observable,
    predicted_costs,
    prepare_cost,
)
from koopnem.simulators import TankSystem, simulate


def series(beta, c_eta, cq, cr, gamma, tau):
    mpmath.mp.dps = 40
    total = mpmath.mpf(0)
    for t in range(tau + 1):
        e = c_eta * sum(mpmath.mpf(beta) ** s for s in range(t))
        total += mpmath.mpf(gamma) ** t * (cq + cr) * (2 * e * mpmath.mpf(beta) ** t + e**2)
    return total


@pytest.mark.parametrize("args", [(2.0, 0.1, 1.0, 1.0, 0.2), (0.7, 0.3, 2.0, 0.5, 0.9), (1.0, 0.1, 1.0, 1.0, 0.5)])
def test_cost_bound_matches_series(args):
    for tau in (0, 1, 5, 20):
        assert cost_bound(*args, tau) == pytest.approx(float(series(*args, tau)), rel=1e-12, abs=1e-15)


def test_cost_bound_limit_and_cap():
    args = (2.0, 0.1, 1.0, 1.0, 0.2)
    limit = cost_bound_limit(*args)
    assert limit == pytest.approx(float(series(*args, 400)), rel=1e-12)
    assert cost_bound(*args, 400) == pytest.approx(limit, abs=1e-6)
    assert cost_bound_cap(*args) == pytest.approx(2.1)
    assert cost_bound_cap(*args) >= limit
    with pytest.raises(InputError):
        cost_bound_cap(0.5, 0.1, 1, 1, 0.2)


@settings(max_examples=50, deadline=None)
@given(beta=st.floats(1.01, 3.0), gamma_frac=st.floats(0.01, 0.99), c=st.floats(0.0, 2.0))
def test_cap_dominates_every_partial_sum(beta, gamma_frac, c):
    gamma = gamma_frac / beta**2
    cap = cost_bound_cap(beta, c, 1.0, 1.0, gamma)
    for tau in (0, 3, 30):
        assert cost_bound(beta, c, 1.0, 1.0, gamma, tau) <= cap * (1 + 1e-9) + 1e-12


def test_spec_validation():
    with pytest.raises(InputError):
        CostSpec(1.5, 10)
    with pytest.raises(InputError):
        CostSpec(0.9, -1)
    np.testing.assert_allclose(CostSpec(0.5, 3).discounts, [1, 0.5, 0.25, 0.125])


def test_actual_cost_by_hand():
    sys = TankSystem()
    spec = CostSpec(0.95, 5)
    traj = simulate(sys, np.array([0.8]), np.array([0.2]), 5)[:, 0]
    u = np.tanh(10**0.2 * traj)
    expected = sum(0.95**t * (traj[t] ** 2 + u[t] ** 2) for t in range(6))
    assert actual_cost(sys, 0.8, 0.2, spec) == pytest.approx(expected, rel=1e-14)


def test_interpolate_observable():
    G = np.array([[1.0, 0.5], [0.5, 1.0]])
    c = interpolate_observable(G, np.array([1.0, 2.0]))
    np.testing.assert_allclose(G @ c, [1.0, 2.0])
    with pytest.raises(FitError):
        interpolate_observable(np.ones((2, 2)), np.array([1.0, 2.0]))


def test_prediction_exact_at_training_pairs(tank_edmd, tank_dataset):
    """Action term at t = 0 and state term at t = 1 interpolate exactly at the samples."""
    sys = TankSystem()
    idx = np.arange(0, 441, 37)
    X, A = tank_dataset.states[idx], tank_dataset.policy_params[idx]
    # repeated successors (x = 0 under every policy) make G_yy singular, so keep the default jitter
    act_only = prepare_cost(tank_edmd, sys, CostSpec(1.0, 0, state_weight=0.0))
    np.testing.assert_allclose(predicted_costs(tank_edmd, X, A, act_only), sys.policy(X, A) ** 2, atol=1e-7)
    both = prepare_cost(tank_edmd, sys, CostSpec(1.0, 1, action_weight=0.0))
    pred = predicted_costs(tank_edmd, X, A, both)
    s0 = both.state_coef @ np.maximum(1 - np.abs(tank_dataset.successors - X[:, 0]), 0) ** 2
    np.testing.assert_allclose(pred, s0**2 + tank_dataset.successors[idx, 0] ** 2, atol=1e-7)


def test_cost_surface_shapes(tank_edmd, tmp_path):
    X = np.array([[-1.0], [1.0]])
    A = np.array([[0.0], [0.5]])
    surf = cost_surface(tank_edmd, TankSystem(), X, A, CostSpec(0.95, 10))
    np.testing.assert_allclose(surf.actual, actual_costs(TankSystem(), X, A, CostSpec(0.95, 10)))
    assert np.all(surf.abs_error >= 0)
    lines = surf.save(tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "x1,alpha1,actual_cost,predicted_cost,abs_error" and len(lines) == 3
