"""Propagating features under a learned operator and reading out states.

A propagated feature at time ``t >= 1`` is a coefficient vector ``c`` over
the successor features ``phi_{y_i}``. One step under a fixed policy maps
``c`` to ``theta @ ((G_xy @ c) * v)`` where ``v`` is the policy embedding;
the initial step instead uses kernel sections at the raw state. Readouts are
linear in ``c``: the identity observable interpolated on the successor
nodes collapses to ``Y.T @ c``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .csvio import write_csv
from .errors import InputError
from .kernels import policy_matrix, radial_matrix
from .learning import LearnedOperator
from .simulators import simulate

__all__ = [
    "FeatureState",
    "PolicyEmbedding",
    "CoverageWarning",
    "embed_policy",
    "state_sections",
    "predict_step",
    "readout_state",
    "readout_weights",
    "readout_observable",
    "predict_trajectory",
    "propagate",
    "ErrorSurface",
    "error_surface",
    "multistep_bound",
    "multistep_cap",
]


class CoverageWarning(UserWarning):
    """A state lies outside the support of every training kernel section."""


@dataclass(frozen=True, eq=False)
class FeatureState:
    coefficients: np.ndarray
    time_index: int
    out_of_coverage: bool = False

    def __post_init__(self):
        if self.time_index < 1:
            raise InputError("coefficient features exist only for time_index >= 1")


@dataclass(frozen=True, eq=False)
class PolicyEmbedding:
    v: np.ndarray


def embed_policy(operator: LearnedOperator, alpha) -> PolicyEmbedding:
    alpha = np.atleast_1d(np.asarray(alpha, float))
    P = operator.dataset.policy_params
    if alpha.shape != (P.shape[1],):
        raise InputError(f"policy parameters must have dimension {P.shape[1]}, got {alpha.shape}")
    return PolicyEmbedding(policy_matrix(operator.ku, P, alpha[None, :])[:, 0])


def state_sections(operator: LearnedOperator, states) -> np.ndarray:
    """``K[j, n] = kappa(x_j, states[n])`` on scaled coordinates."""
    ds = operator.dataset
    return radial_matrix(operator.kx, ds.scale(ds.states), ds.scale(states))


def _raw_b(operator, x, policy):
    x = np.atleast_1d(np.asarray(x, float))
    return state_sections(operator, x[None, :])[:, 0] * policy.v


def predict_step(operator: LearnedOperator, state_or_feature, policy: PolicyEmbedding) -> FeatureState:
    """One application of the operator under a fixed policy."""
    v = np.asarray(policy.v)
    if v.shape != (operator.m,):
        raise InputError(f"policy embedding has length {v.shape}, operator has m={operator.m}")
    if isinstance(state_or_feature, FeatureState):
        c = np.asarray(state_or_feature.coefficients)
        if c.shape != (operator.m,):
            raise InputError(f"feature has length {c.shape}, operator has m={operator.m}")
        b = (operator.grams.G_xy @ c) * v
        t = state_or_feature.time_index + 1
    else:
        b = _raw_b(operator, state_or_feature, policy)
        t = 1
    return FeatureState(operator.theta @ b, t, not np.any(b))


def readout_weights(operator: LearnedOperator, nodes: str = "successors") -> np.ndarray:
    """Matrix ``W`` (``m x d_x``) with predicted state ``W.T @ c``.

    ``"successors"`` interpolates the identity on the successor nodes, which
    collapses to ``W = Y``. ``"samples"`` interpolates it on the distinct
    sample states instead and evaluates that interpolant at the successors.
    """
    ds = operator.dataset
    if nodes == "successors":
        return np.asarray(ds.successors)
    if nodes != "samples":
        raise InputError(f"unknown readout nodes {nodes!r}")
    xu = np.unique(ds.states, axis=0)
    K = radial_matrix(operator.kx, ds.scale(xu))
    d = np.linalg.solve(K, xu)
    return radial_matrix(operator.kx, ds.scale(ds.successors), ds.scale(xu)) @ d


def readout_state(operator: LearnedOperator, feature: FeatureState) -> np.ndarray:
    return operator.dataset.successors.T @ feature.coefficients


def readout_observable(operator: LearnedOperator, feature: FeatureState, node_values) -> float:
    node_values = np.asarray(node_values, float)
    if node_values.shape != (operator.m,):
        raise InputError(f"need {operator.m} node values, got {node_values.shape}")
    return float(feature.coefficients @ node_values)


def predict_trajectory(operator: LearnedOperator, x0, alpha, horizon: int) -> np.ndarray:
    """Predicted states ``x_1 .. x_horizon`` as a ``(horizon, d_x)`` array."""
    if horizon < 1:
        raise InputError("horizon must be a positive integer")
    policy = embed_policy(operator, alpha)
    feature = predict_step(operator, x0, policy)
    if feature.out_of_coverage:
        warnings.warn(f"initial state {x0} is outside kernel coverage", CoverageWarning, stacklevel=2)
    out = [readout_state(operator, feature)]
    for _ in range(horizon - 1):
        feature = predict_step(operator, feature, policy)
        out.append(readout_state(operator, feature))
    return np.array(out)


def propagate(operator: LearnedOperator, states, params, horizon: int):
    """Batched propagation for ``N`` initial conditions.

    Returns ``(C, B)`` with ``C[t]`` (``m x N``) the feature coefficients at
    time ``t + 1`` and ``B[t]`` the inner products with the training pairs
    at time ``t`` (``B[0]`` from the raw states).
    """
    ds = operator.dataset
    states = np.asarray(states, float).reshape(-1, ds.state_dim)
    params = np.asarray(params, float).reshape(-1, ds.param_dim)
    if states.shape[0] != params.shape[0]:
        raise InputError("states and params must have the same number of rows")
    Vp = policy_matrix(operator.ku, ds.policy_params, params)
    b = state_sections(operator, states) * Vp
    C = np.empty((horizon, operator.m, states.shape[0]))
    B = np.empty((horizon + 1, operator.m, states.shape[0]))
    B[0] = b
    for t in range(horizon):
        C[t] = operator.theta @ b
        b = (operator.grams.G_xy @ C[t]) * Vp
        B[t + 1] = b
    return C, B


@dataclass(frozen=True, eq=False)
class ErrorSurface:
    """Absolute prediction errors ``errors[h, n, k]`` for horizon ``horizons[h]``,
    test point ``n`` and reported coordinate ``coordinates[k]``."""

    states: np.ndarray
    params: np.ndarray
    horizons: tuple
    coordinates: tuple
    errors: np.ndarray
    predicted: np.ndarray
    actual: np.ndarray
    out_of_coverage: np.ndarray

    def at(self, horizon: int) -> np.ndarray:
        return self.errors[self.horizons.index(horizon)]

    def save(self, path, metadata=None):
        cols = (
            [f"x{j + 1}" for j in range(self.states.shape[1])]
            + [f"alpha{j + 1}" for j in range(self.params.shape[1])]
            + ["horizon"]
            + [f"abs_err_x{k + 1}" for k in self.coordinates]
        )
        rows = []
        for h_i, h in enumerate(self.horizons):
            for n in range(self.states.shape[0]):
                rows.append(
                    [*map(float, self.states[n]), *map(float, self.params[n]), h]
                    + [*map(float, self.errors[h_i, n])]
                )
        return write_csv(path, cols, rows, metadata)


def error_surface(
    operator: LearnedOperator,
    system,
    test_states,
    test_params,
    horizons,
    coordinates=None,
    readout: str = "successors",
) -> ErrorSurface:
    """Compare predicted against simulated closed-loop states.

    ``coordinates`` selects zero-based state components (all by default).
    Horizon 0 has zero error by definition. ``readout`` is passed to
    :func:`readout_weights`.
    """
    ds = operator.dataset
    X0 = np.asarray(test_states, float).reshape(-1, ds.state_dim)
    P = np.asarray(test_params, float).reshape(-1, ds.param_dim)
    horizons = tuple(int(h) for h in horizons)
    if any(h < 0 for h in horizons):
        raise InputError("horizons must be nonnegative")
    coords = tuple(range(ds.state_dim)) if coordinates is None else tuple(coordinates)
    T = max(horizons) if horizons else 0
    truth = simulate(system, X0, P, T)
    pred = np.empty_like(truth)
    pred[0] = X0
    if T:
        C, B = propagate(operator, X0, P, T)
        pred[1:] = np.einsum("tmn,md->tnd", C, readout_weights(operator, readout))
        uncovered = ~np.any(B[0], axis=0)
    else:
        uncovered = np.zeros(X0.shape[0], bool)
    idx = list(horizons)
    p = pred[idx][..., list(coords)]
    a = truth[idx][..., list(coords)]
    return ErrorSurface(X0, P, horizons, coords, np.abs(p - a), p, a, uncovered)


def multistep_bound(beta: float, c_eta: float, t: int) -> float:
    """Geometric accumulation ``(1 - beta^t)/(1 - beta) * c_eta`` of one-step errors."""
    if beta < 0 or c_eta < 0 or t < 0:
        raise InputError("beta, c_eta and t must be nonnegative")
    if t == 0:
        return 0.0
    if beta == 1:
        return float(t * c_eta)
    return float((1 - beta**t) / (1 - beta) * c_eta)


def multistep_cap(beta: float, c_eta: float) -> float:
    """Uniform-in-time cap ``c_eta / (1 - beta)``; infinite unless ``beta < 1``."""
    return float(c_eta / (1 - beta)) if beta < 1 else float("inf")
