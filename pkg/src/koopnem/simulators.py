"""Ground-truth benchmark systems and their data-generation protocols.

Two closed-loop systems are provided:

* a liquid storage tank with a scalar level ``x`` and valve action ``a``;
* an isothermal Williams-Otto CSTR with six mass fractions, one manipulated
  feed ``F_B`` and a measured disturbance ``F_A``.

Both expose the same small interface used by prediction and cost code:
``policy(states, params)`` and ``closed_loop_step(states, params)``, each
vectorized over leading batch dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import root

from .errors import ConfigurationError, SimulationError
from .gram import SnapshotDataset

__all__ = [
    "tank_step",
    "tanh_gain_policy",
    "two_gain_policy",
    "TankSystem",
    "WilliamsOttoModel",
    "WilliamsOttoSystem",
    "generate_tank_grid",
    "generate_wo_sample",
    "wo_disturbance_cost_experiment",
    "simulate",
]


def tank_step(x, a):
    """Tank level after one 2-minute sampling interval (origin translated)."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    out = x + 0.2 - (11.0 + 7.0 * (1.0 + 0.05**a)) ** -0.5
    return out if out.ndim else float(out)


def tanh_gain_policy(x, alpha):
    """``u = tanh(10**alpha * x)``."""
    return np.tanh(10.0 ** np.asarray(alpha, float) * np.asarray(x, float))


def two_gain_policy(x, alpha):
    """``u = 10**alpha_1 * x_3 + 3 * 10**alpha_2 * x_6`` on scaled WO states."""
    x = np.asarray(x, float)
    alpha = np.asarray(alpha, float)
    k1 = 10.0 ** alpha[..., 0]
    k2 = 3.0 * 10.0 ** alpha[..., 1]
    return k1 * x[..., 2] + k2 * x[..., 5]


class TankSystem:
    """Closed-loop tank under the ``tanh(10**alpha x)`` feedback family."""

    name = "tank"
    state_dim = 1
    param_dim = 1
    param_bounds = ((-1.0, 1.0),)

    def policy(self, states, params):
        states = np.asarray(states, float)
        params = np.asarray(params, float)
        return tanh_gain_policy(states[..., 0], params[..., 0])

    def closed_loop_step(self, states, params):
        states = np.asarray(states, float)
        a = self.policy(states, params)
        return np.asarray(tank_step(states[..., 0], a))[..., None]

    def metadata(self) -> dict:
        return {"system": "tank"}


@dataclass(frozen=True)
class WilliamsOttoModel:
    """Isothermal Williams-Otto reactor (species A, B, C, E, G, P).

    Scaled states are ``x = (X - X_ss) / X_ss`` where ``X_ss`` is the exact
    steady state under nominal feeds, refined by Newton iteration from the
    tabulated values in ``tabulated_steady_state``.
    """

    W: float = 2104.7
    k0: tuple = (1.6599e6, 7.2117e8, 2.6745e12)
    E_over_R: tuple = (6666.7, 8333.3, 11111.0)
    T: float = 366.0
    F_A_ss: float = 1.8
    F_B_ss: float = 6.1
    tabulated_steady_state: tuple = (0.0635, 0.4762, 0.0111, 0.1316, 0.0813, 0.1045)
    sampling_interval: float = 20.0
    substep: float = 1.0

    def __post_init__(self):
        if self.substep <= 0 or self.sampling_interval <= 0:
            raise ConfigurationError("substep and sampling_interval must be positive")

    @cached_property
    def rate_constants(self) -> np.ndarray:
        return np.asarray(self.k0) * np.exp(-np.asarray(self.E_over_R) / self.T)

    def derivatives(self, X, F_A, F_B):
        """``dX/dt`` for physical mass fractions ``X[..., 6]``."""
        X = np.asarray(X, float)
        F_A = np.asarray(F_A, float)
        F_B = np.asarray(F_B, float)
        A, B, C, E, G, P = np.moveaxis(X, -1, 0)
        k1, k2, k3 = self.rate_constants
        W = self.W
        r1 = W * k1 * A * B
        r2 = W * k2 * B * C
        r3 = W * k3 * C * P
        F = F_A + F_B
        d = np.stack(
            [
                F_A - F * A - r1,
                F_B - F * B - r1 - r2,
                -F * C + 2 * r1 - 2 * r2 - r3,
                -F * E + r2,
                -F * G + 1.5 * r3,
                -F * P + r2 - 0.5 * r3,
            ],
            axis=-1,
        )
        return d / W

    @cached_property
    def steady_state(self) -> np.ndarray:
        guess = np.asarray(self.tabulated_steady_state, float)
        sol = root(
            lambda X: self.derivatives(X, self.F_A_ss, self.F_B_ss) / guess,
            guess,
            method="lm",
            options={"xtol": 1e-15, "ftol": 1e-15},
        )
        X = sol.x
        if not np.all(np.abs(self.derivatives(X, self.F_A_ss, self.F_B_ss)) < 1e-14):
            raise SimulationError("steady-state refinement did not converge")
        X.setflags(write=False)
        return X

    def to_physical(self, x):
        return self.steady_state * (1.0 + np.asarray(x, float))

    def to_scaled(self, X):
        return np.asarray(X, float) / self.steady_state - 1.0

    def integrate(self, X, F_A, F_B, duration, substep=None):
        """Fixed-step RK4 over ``duration`` seconds on physical states."""
        h0 = self.substep if substep is None else substep
        n = max(1, int(round(duration / h0)))
        h = duration / n
        F_A = np.asarray(F_A, float)
        F_B = np.asarray(F_B, float)
        if np.any(F_A < 0) or np.any(F_B < 0):
            raise SimulationError("negative feed flow")
        X = np.asarray(X, float)
        f = self.derivatives
        for _ in range(n):
            k1 = f(X, F_A, F_B)
            k2 = f(X + 0.5 * h * k1, F_A, F_B)
            k3 = f(X + 0.5 * h * k2, F_A, F_B)
            k4 = f(X + h * k3, F_A, F_B)
            X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise SimulationError("non-finite state during integration")
        return X

    def step(self, x, a, F_A=None, duration=None, substep=None):
        """Advance scaled states by one sampling interval with ``F_B = F_B_ss (1 + a)``."""
        F_A = self.F_A_ss if F_A is None else F_A
        a = np.asarray(a, float)
        F_B = self.F_B_ss * (1.0 + a)
        if np.any(F_B < 0):
            raise SimulationError(f"action implies negative F_B (min a = {a.min():.3g})")
        X = self.to_physical(x)
        X = self.integrate(
            X, F_A, F_B, self.sampling_interval if duration is None else duration, substep
        )
        return self.to_scaled(X)

    def metadata(self) -> dict:
        return {
            "W": self.W,
            "k0": list(self.k0),
            "E_over_R": list(self.E_over_R),
            "T": self.T,
            "F_A_ss": self.F_A_ss,
            "F_B_ss": self.F_B_ss,
            "steady_state": self.steady_state.tolist(),
            "sampling_interval": self.sampling_interval,
            "substep": self.substep,
        }


@dataclass
class WilliamsOttoSystem:
    """Closed-loop WO reactor under ``u = k1 x3 + k2 x6`` at nominal ``F_A``."""

    model: WilliamsOttoModel = field(default_factory=WilliamsOttoModel)
    F_A: float | None = None

    name = "williams_otto"
    state_dim = 6
    param_dim = 2
    param_bounds = ((-2.0, 0.0), (-2.0, 0.0))

    def policy(self, states, params):
        return two_gain_policy(states, params)

    def closed_loop_step(self, states, params):
        states = np.asarray(states, float)
        return self.model.step(states, self.policy(states, params), self.F_A)

    def metadata(self) -> dict:
        return {"system": "williams_otto", **self.model.metadata()}


def simulate(system, x0, params, horizon: int):
    """Closed-loop states ``x_0 .. x_horizon`` stacked on axis 0."""
    x = np.asarray(x0, float)
    out = [x]
    for _ in range(horizon):
        x = system.closed_loop_step(x, params)
        out.append(x)
    return np.stack(out)


def generate_tank_grid(
    n_x: int, n_alpha: int, x_range=(-2.0, 2.0), alpha_range=(-1.0, 1.0)
) -> SnapshotDataset:
    """Mesh of levels and gain exponents with one-step successors."""
    if n_x < 2 or n_alpha < 2:
        raise ConfigurationError("grid sizes must be at least 2")
    xs = np.linspace(*x_range, n_x)
    alphas = np.linspace(*alpha_range, n_alpha)
    X, A = np.meshgrid(xs, alphas, indexing="ij")
    X = X.ravel()
    A = A.ravel()
    Y = tank_step(X, tanh_gain_policy(X, A))
    return SnapshotDataset(
        X[:, None],
        A[:, None],
        Y[:, None],
        metadata={"system": "tank", "n_x": n_x, "n_alpha": n_alpha},
    )


def _state_scales(states, rule: str):
    if rule == "none":
        return np.ones(states.shape[1])
    sd = states.std(axis=0, ddof=1)
    if rule == "std":
        return sd
    if rule == "stderr":
        return sd / np.sqrt(states.shape[0])
    raise ConfigurationError(f"unknown state scaling rule {rule!r}")


def generate_wo_sample(
    m: int,
    seed: int,
    model: WilliamsOttoModel | None = None,
    duration: float = 14400.0,
    record_interval: float = 5.0,
    amplitude: float = 0.5,
    alpha_bounds=(-2.0, 0.0),
    scale_rule: str = "std",
) -> SnapshotDataset:
    """Sample states from a disturbed open-loop orbit and attach random policies.

    ``F_A`` flips between ``F_A_ss (1 +/- amplitude)`` by a fair coin at every
    record instant. ``m`` recorded states are drawn without replacement, each
    gets an independent uniform gain exponent pair, and successors are one
    sampling interval of the closed loop at nominal ``F_A``.
    """
    model = model or WilliamsOttoModel()
    rng = np.random.default_rng(seed)
    n_steps = int(round(duration / record_interval))
    if not 1 <= m <= n_steps:
        raise ConfigurationError(f"m must lie in [1, {n_steps}], got {m}")
    X = model.steady_state.copy()
    orbit = np.empty((n_steps, 6))
    signs = np.where(rng.random(n_steps) < 0.5, -1.0, 1.0)
    for i in range(n_steps):
        X = model.integrate(X, model.F_A_ss * (1 + amplitude * signs[i]), model.F_B_ss, record_interval)
        orbit[i] = X
    x_orbit = model.to_scaled(orbit)
    idx = rng.choice(n_steps, size=m, replace=False)
    states = x_orbit[idx]
    params = rng.uniform(alpha_bounds[0], alpha_bounds[1], size=(m, 2))
    system = WilliamsOttoSystem(model)
    successors = system.closed_loop_step(states, params)
    return SnapshotDataset(
        states,
        params,
        successors,
        _state_scales(states, scale_rule),
        metadata={"system": "williams_otto", "seed": seed, "m": m, "scale_rule": scale_rule},
    )


def wo_disturbance_cost_experiment(
    k1: float,
    k2: float,
    seed: int,
    horizon: int = 250,
    amplitude: float = 0.25,
    model: WilliamsOttoModel | None = None,
    x0=None,
) -> float:
    """Undiscounted ``sum_t 25 x6^2 + u^2`` under i.i.d. uniform ``F_A`` noise."""
    if k1 <= 0 or k2 <= 0:
        raise ConfigurationError("gains must be positive")
    model = model or WilliamsOttoModel()
    rng = np.random.default_rng(seed)
    x = np.zeros(6) if x0 is None else np.asarray(x0, float)
    disturbances = model.F_A_ss * (1 + amplitude * rng.uniform(-1, 1, size=horizon))
    total = 0.0
    for t in range(horizon + 1):
        u = k1 * x[2] + k2 * x[5]
        total += 25.0 * x[5] ** 2 + u**2
        if t < horizon:
            x = model.step(x, u, disturbances[t])
    return float(total)
