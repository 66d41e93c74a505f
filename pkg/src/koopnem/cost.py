"""Policy evaluation: simulated and operator-predicted accumulated costs.

Stage costs are ``state_weight * s(x)^2 + action_weight * u(x)^2`` with
``s`` one state coordinate. For the predicted cost, ``s`` is interpolated
on the successor nodes and ``u`` on the training pairs, so each stage term
is the square of a linear functional of the propagated feature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .csvio import write_csv
from .errors import FitError, InputError
from .kernels import radial_matrix
from .learning import LearnedOperator, MAX_CONDITION
from .prediction import propagate
from .simulators import simulate

__all__ = [
    "CostSpec",
    "PreparedCost",
    "prepare_cost",
    "interpolate_observable",
    "actual_cost",
    "actual_costs",
    "predicted_cost",
    "predicted_costs",
    "cost_bound",
    "cost_bound_cap",
    "cost_bound_limit",
    "CostSurface",
    "cost_surface",
]


@dataclass(frozen=True)
class CostSpec:
    gamma: float
    horizon: int
    state_weight: float = 1.0
    action_weight: float = 1.0
    state_index: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise InputError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.horizon < 0:
            raise InputError("horizon must be nonnegative")
        if self.state_weight < 0 or self.action_weight < 0:
            raise InputError("cost weights must be nonnegative")

    @property
    def discounts(self) -> np.ndarray:
        return self.gamma ** np.arange(self.horizon + 1)


def interpolate_observable(gram, values, jitter: float = 0.0) -> np.ndarray:
    """Coefficients ``(gram + jitter I)^-1 values`` of a kernel interpolant."""
    G = np.asarray(gram, float)
    values = np.asarray(values, float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or values.shape != (G.shape[0],):
        raise InputError(f"gram {G.shape} and values {values.shape} do not fit")
    A = G + jitter * np.eye(G.shape[0])
    w = np.linalg.eigvalsh(A)
    aw = np.abs(w)
    cond = math.inf if aw.min() == 0 else float(aw.max() / aw.min())
    if not cond < MAX_CONDITION:
        raise FitError(f"interpolation matrix is ill-conditioned (condition estimate {cond:.3e})", cond)
    if w.min() > 0:
        return sla.cho_solve(sla.cho_factor(A, lower=True), values)
    return sla.solve(A, values, assume_a="sym")


@dataclass(frozen=True, eq=False)
class PreparedCost:
    """Node values and interpolation coefficients for one operator and spec.

    ``state_nodes[i] = s(y_i)``, ``action_nodes[i] = u_i(x_i)``;
    ``state_coef`` interpolates ``s`` on the successor nodes (used only for
    the raw-state term at ``t = 0``) and ``action_coef`` interpolates ``u``
    on the training pairs.
    """

    spec: CostSpec
    state_nodes: np.ndarray
    action_nodes: np.ndarray
    state_coef: np.ndarray
    action_coef: np.ndarray


def prepare_cost(operator: LearnedOperator, system, spec: CostSpec, jitter: float | None = None) -> PreparedCost:
    ds = operator.dataset
    g = operator.grams
    if jitter is None:
        jitter = 1e-10 * float(np.trace(g.G_xu)) / g.m
    state_nodes = ds.successors[:, spec.state_index]
    action_nodes = np.asarray(system.policy(ds.states, ds.policy_params), float)
    return PreparedCost(
        spec,
        state_nodes,
        action_nodes,
        interpolate_observable(g.G_yy, state_nodes, jitter),
        interpolate_observable(g.G_xu, action_nodes, jitter),
    )


def actual_costs(system, states, params, spec: CostSpec) -> np.ndarray:
    """Discounted closed-loop costs for a batch of initial conditions."""
    states = np.asarray(states, float).reshape(-1, system.state_dim)
    params = np.asarray(params, float).reshape(-1, system.param_dim)
    traj = simulate(system, states, params, spec.horizon)
    u = system.policy(traj, params[None, ...])
    stage = spec.state_weight * traj[..., spec.state_index] ** 2 + spec.action_weight * u**2
    return spec.discounts @ stage


def actual_cost(system, x0, alpha, spec: CostSpec) -> float:
    return float(actual_costs(system, np.atleast_1d(x0)[None, :], np.atleast_1d(alpha)[None, :], spec)[0])


def predicted_costs(operator: LearnedOperator, states, params, prepared: PreparedCost) -> np.ndarray:
    """Operator-predicted discounted costs for a batch of initial conditions."""
    spec = prepared.spec
    ds = operator.dataset
    states = np.asarray(states, float).reshape(-1, ds.state_dim)
    C, B = propagate(operator, states, params, spec.horizon)
    K0 = radial_matrix(operator.kx, ds.scale(ds.successors), ds.scale(states))
    s = np.empty((spec.horizon + 1, states.shape[0]))
    s[0] = prepared.state_coef @ K0
    if spec.horizon:
        s[1:] = np.einsum("m,tmn->tn", prepared.state_nodes, C)
    a = np.einsum("m,tmn->tn", prepared.action_coef, B)
    stage = spec.state_weight * s**2 + spec.action_weight * a**2
    return spec.discounts @ stage


def predicted_cost(operator: LearnedOperator, x0, alpha, prepared: PreparedCost) -> float:
    return float(
        predicted_costs(operator, np.atleast_1d(x0)[None, :], np.atleast_1d(alpha)[None, :], prepared)[0]
    )


def _geometric(beta, t):
    return t if beta == 1 else (1 - beta**t) / (1 - beta)


def cost_bound(beta, c_eta, c_Q, c_R, gamma, tau: int) -> float:
    """Finite-horizon bound on ``|predicted - actual|`` accumulated cost."""
    if min(beta, c_eta, c_Q, c_R, gamma) < 0 or tau < 0:
        raise InputError("all bound arguments must be nonnegative")
    total = 0.0
    for t in range(tau + 1):
        e = c_eta * _geometric(beta, t)
        total += gamma**t * (c_Q + c_R) * (2 * e * beta**t + e**2)
    return float(total)


def cost_bound_cap(beta, c_eta, c_Q, c_R, gamma) -> float:
    """Horizon-free relaxation valid for ``beta > 1`` and ``gamma beta^2 < 1``."""
    if not (beta > 1 and 0 <= gamma * beta**2 < 1):
        raise InputError("the cap needs beta > 1 and gamma * beta**2 < 1")
    return float((c_Q + c_R) / (1 - gamma * beta**2) * (2 * c_eta / (beta - 1) + c_eta**2 / (beta - 1) ** 2))


def cost_bound_limit(beta, c_eta, c_Q, c_R, gamma) -> float:
    """Exact ``tau -> infinity`` value of :func:`cost_bound` (needs ``gamma beta^2 < 1``)."""
    if beta == 1 or not 0 <= gamma * max(beta, 1) ** 2 < 1:
        raise InputError("the limit needs beta != 1 and gamma * max(beta, 1)**2 < 1")
    s = lambda r: 1 / (1 - r)  # noqa: E731
    d = 1 - beta
    cross = 2 * c_eta / d * (s(gamma * beta) - s(gamma * beta**2))
    square = (c_eta / d) ** 2 * (s(gamma) - 2 * s(gamma * beta) + s(gamma * beta**2))
    return float((c_Q + c_R) * (cross + square))


@dataclass(frozen=True, eq=False)
class CostSurface:
    states: np.ndarray
    params: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.predicted - self.actual)

    def save(self, path, metadata=None):
        cols = (
            [f"x{j + 1}" for j in range(self.states.shape[1])]
            + [f"alpha{j + 1}" for j in range(self.params.shape[1])]
            + ["actual_cost", "predicted_cost", "abs_error"]
        )
        rows = [
            [*map(float, x), *map(float, p), float(a), float(q), float(e)]
            for x, p, a, q, e in zip(self.states, self.params, self.actual, self.predicted, self.abs_error)
        ]
        return write_csv(path, cols, rows, metadata)


def cost_surface(operator: LearnedOperator, system, states, params, spec: CostSpec, jitter=None) -> CostSurface:
    states = np.asarray(states, float).reshape(-1, system.state_dim)
    params = np.asarray(params, float).reshape(-1, system.param_dim)
    prepared = prepare_cost(operator, system, spec, jitter)
    return CostSurface(
        states,
        params,
        actual_costs(system, states, params, spec),
        predicted_costs(operator, states, params, prepared),
    )
