"""Snapshot datasets, Gram assembly, sparsity and fill-distance diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .csvio import read_csv, write_csv
from .errors import InputError
from .kernels import PolicyKernelSpec, RadialKernelSpec, policy_matrix, radial_matrix

__all__ = [
    "SnapshotDataset",
    "GramSet",
    "assemble",
    "sparsity",
    "nonzero_fraction",
    "fill_distance",
    "save_dataset",
    "load_dataset",
    "save_gram",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SnapshotDataset:
    """Triples ``(x_i, alpha_i, y_i)`` with ``y_i = f(x_i, u(x_i; alpha_i))``.

    ``state_scales`` divides every state coordinate before kernel distances
    are taken.
    """

    states: np.ndarray
    policy_params: np.ndarray
    successors: np.ndarray
    state_scales: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.states, dtype=float)
        P = np.asarray(self.policy_params, dtype=float)
        Y = np.asarray(self.successors, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if P.ndim == 1:
            P = P[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        m = X.shape[0]
        if m < 1:
            raise InputError("dataset must contain at least one snapshot")
        if P.shape[0] != m or Y.shape[0] != m:
            raise InputError(
                f"row counts differ: states {m}, policy_params {P.shape[0]}, successors {Y.shape[0]}"
            )
        if Y.shape[1] != X.shape[1]:
            raise InputError(f"states have {X.shape[1]} columns but successors have {Y.shape[1]}")
        scales = np.ones(X.shape[1]) if self.state_scales is None else np.asarray(self.state_scales, float)
        if scales.shape != (X.shape[1],) or not np.all(scales > 0):
            raise InputError(f"state_scales must be {X.shape[1]} positive numbers, got {scales}")
        object.__setattr__(self, "states", _frozen(X))
        object.__setattr__(self, "policy_params", _frozen(P))
        object.__setattr__(self, "successors", _frozen(Y))
        object.__setattr__(self, "state_scales", _frozen(scales))

    @property
    def m(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def param_dim(self) -> int:
        return self.policy_params.shape[1]

    def scale(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(-1, self.state_dim) if self.state_dim > 1 else states[:, None]
        if states.shape[1] != self.state_dim:
            raise InputError(f"expected {self.state_dim}-dimensional states, got {states.shape[1]}")
        return states / self.state_scales

    def subset(self, index) -> "SnapshotDataset":
        index = np.asarray(index)
        return SnapshotDataset(
            self.states[index],
            self.policy_params[index],
            self.successors[index],
            self.state_scales,
            dict(self.metadata),
        )


@dataclass(frozen=True, eq=False)
class GramSet:
    """``G_xu[i, j]`` product kernel on training pairs, ``G_yy`` on successors,
    ``G_xy[j, i] = kappa(x_j, y_i)``."""

    G_xu: np.ndarray
    G_yy: np.ndarray
    G_xy: np.ndarray
    G_xx: np.ndarray
    G_uu: np.ndarray

    @property
    def m(self) -> int:
        return self.G_xu.shape[0]


def assemble(dataset: SnapshotDataset, kx: RadialKernelSpec, ku: PolicyKernelSpec) -> GramSet:
    """Assemble all Gram matrices on scaled coordinates."""
    Xs = dataset.scale(dataset.states)
    Ys = dataset.scale(dataset.successors)
    G_xx = radial_matrix(kx, Xs)
    G_uu = policy_matrix(ku, dataset.policy_params)
    G_xu = G_xx * G_uu
    G_yy = radial_matrix(kx, Ys)
    G_xy = radial_matrix(kx, Xs, Ys)
    return GramSet(*(_frozen(G) for G in (G_xu, G_yy, G_xy, G_xx, G_uu)))


def sparsity(matrix) -> float:
    """Sum of entries divided by ``m**2``."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"sparsity needs a square matrix, got shape {M.shape}")
    return float(M.sum() / M.shape[0] ** 2)


def nonzero_fraction(matrix) -> float:
    M = np.asarray(matrix)
    return float(np.count_nonzero(M) / M.size)


def fill_distance(
    dataset: SnapshotDataset,
    candidate_states,
    candidate_params=None,
    policy_metric: float = 1.0,
    chunk: int = 2048,
) -> float:
    """Largest distance from a candidate to its nearest sample.

    The distance is the scaled state distance plus ``policy_metric`` times
    the Euclidean parameter distance. With finitely many candidates this
    is a lower bound on the true fill distance.
    """
    C = dataset.scale(candidate_states)
    if C.shape[0] == 0:
        raise InputError("fill_distance needs at least one candidate")
    Xs = dataset.scale(dataset.states)
    if candidate_params is not None:
        Cp = np.asarray(candidate_params, dtype=float).reshape(C.shape[0], -1)
        if Cp.shape[1] != dataset.param_dim:
            raise InputError(f"candidate parameters must have dimension {dataset.param_dim}")
    worst = 0.0
    for start in range(0, C.shape[0], chunk):
        D = cdist(C[start : start + chunk], Xs)
        if candidate_params is not None and policy_metric:
            D = D + policy_metric * cdist(Cp[start : start + chunk], dataset.policy_params)
        worst = max(worst, float(D.min(axis=1).max()))
    return worst


_MATRIX_FILES = ("states", "policy_params", "successors")


def save_dataset(dataset: SnapshotDataset, directory, metadata=None) -> dict:
    """Write one CSV per matrix plus ``state_scales.csv``; returns the paths."""
    directory = Path(directory)
    meta = {**dataset.metadata, **(metadata or {})}
    paths = {}
    for name, prefix in zip(_MATRIX_FILES, ("x", "alpha", "y")):
        arr = getattr(dataset, name)
        cols = [f"{prefix}{j + 1}" for j in range(arr.shape[1])]
        paths[name] = write_csv(directory / f"{name}.csv", cols, arr.tolist(), meta)
    cols = [f"x{j + 1}" for j in range(dataset.state_dim)]
    paths["state_scales"] = write_csv(
        directory / "state_scales.csv", cols, [dataset.state_scales.tolist()], meta
    )
    return paths


def load_dataset(directory) -> SnapshotDataset:
    directory = Path(directory)
    arrays = {}
    metadata = {}
    for name in _MATRIX_FILES:
        _, arrays[name], metadata = read_csv(directory / f"{name}.csv")
    scales = None
    if (directory / "state_scales.csv").exists():
        scales = read_csv(directory / "state_scales.csv")[1][0]
    return SnapshotDataset(
        arrays["states"], arrays["policy_params"], arrays["successors"], scales, metadata
    )


def save_gram(matrix, path, metadata=None):
    M = np.asarray(matrix)
    return write_csv(path, [f"c{j + 1}" for j in range(M.shape[1])], M.tolist(), metadata)
