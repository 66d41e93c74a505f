"""Fitting the Koopman-Nemytskii operator from Gram matrices.

The learned operator is stored through its coefficient matrix ``theta``::

    T_hat = sum_ij theta[i, j] phi_{y_i} x phibar_{(x_j, u_j)}

so that applying it to a feature whose inner products with the training
pairs are ``b`` gives the successor-feature coefficients ``theta @ b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .csvio import read_csv, write_csv
from .errors import FitError, InputError
from .gram import GramSet, SnapshotDataset, assemble, load_dataset
from .kernels import PolicyKernelSpec, RadialKernelSpec

__all__ = [
    "LearnedOperator",
    "RRRSolution",
    "fit_kernel_edmd",
    "fit_rrr",
    "default_jitter",
    "generalization_bound",
    "empirical_loss",
    "hs_norm_squared",
    "numerical_rank",
    "save_operator",
    "load_operator",
    "fit",
]

MAX_CONDITION = 1e14


@dataclass(frozen=True, eq=False)
class LearnedOperator:
    theta: np.ndarray
    dataset: SnapshotDataset
    kx: RadialKernelSpec
    ku: PolicyKernelSpec
    method: dict
    grams: GramSet = field(repr=False)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        m = self.grams.m
        if theta.shape != (m, m) or (self.dataset is not None and self.dataset.m != m):
            raise InputError(f"theta has shape {theta.shape}, grams have m={m}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def m(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True, eq=False)
class RRRSolution:
    eigenvalues: np.ndarray
    V: np.ndarray


def default_jitter(grams: GramSet) -> float:
    return 1e-10 * float(np.trace(grams.G_xu)) / grams.m


def _symmetric_inverse(G, jitter, what):
    A = G + jitter * np.eye(G.shape[0])
    w = np.linalg.eigvalsh(A)
    aw = np.abs(w)
    cond = math.inf if aw.min() == 0 else float(aw.max() / aw.min())
    if not cond < MAX_CONDITION:
        raise FitError(f"{what} is ill-conditioned (condition estimate {cond:.3e})", cond)
    I = np.eye(G.shape[0])
    if w.min() > 0:
        return sla.cho_solve(sla.cho_factor(A, lower=True), I), cond
    return sla.solve(A, I, assume_a="sym"), cond


def fit_kernel_edmd(
    grams: GramSet,
    jitter: float | None = None,
    dataset: SnapshotDataset | None = None,
    kx: RadialKernelSpec | None = None,
    ku: PolicyKernelSpec | None = None,
) -> LearnedOperator:
    """Kernel EDMD: ``theta = (G_xu + jitter I)^-1``.

    With ``jitter=0`` the operator maps every training pair exactly onto the
    feature of its successor. ``jitter=None`` uses :func:`default_jitter`.
    """
    if jitter is None:
        jitter = default_jitter(grams)
    if jitter < 0:
        raise InputError(f"jitter must be nonnegative, got {jitter}")
    theta, cond = _symmetric_inverse(np.asarray(grams.G_xu), jitter, "G_xu + jitter*I")
    return LearnedOperator(
        theta,
        dataset,
        kx,
        ku,
        {"name": "kernel_edmd", "jitter": float(jitter), "condition": cond},
        grams,
    )


def fit_rrr(
    grams: GramSet,
    beta: float,
    rank: int,
    dataset: SnapshotDataset | None = None,
    kx: RadialKernelSpec | None = None,
    ku: PolicyKernelSpec | None = None,
):
    """Reduced-rank regression with Hilbert-Schmidt regularization ``beta``.

    Solves ``G_yy G_xu v / m^2 = s^2 (G_xu/m + beta I) v`` for the ``rank``
    leading eigenpairs, normalizes ``v^T (G_xu/m)(G_xu/m + beta I) v = 1``
    and forms ``theta = G_xu V V^T / m^2``, the rank-constrained minimizer of
    the regularized empirical loss in the convention ``c = theta @ b``.

    Returns ``(operator, RRRSolution)``.
    """
    G = np.asarray(grams.G_xu)
    Gy = np.asarray(grams.G_yy)
    m = G.shape[0]
    if not beta > 0:
        raise InputError(f"beta must be positive, got {beta}")
    if not 1 <= rank <= m:
        raise InputError(f"rank must lie in [1, {m}], got {rank}")
    A = Gy @ G / m**2
    M = G / m + beta * np.eye(m)
    try:
        w, vecs = sla.eig(A, M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FitError(f"generalized eigensolver failed: {exc}") from exc
    finite = np.isfinite(w)
    order = np.argsort(-w.real[finite], kind="stable")
    idx = np.flatnonzero(finite)[order][:rank]
    scale = max(float(np.abs(w.real[idx]).max()), np.finfo(float).tiny) if idx.size else 0.0
    # roundoff can push zero eigenvalues slightly negative
    if idx.size < rank or np.any(w.real[idx] < -1e-10 * scale):
        raise FitError(f"fewer than {rank} eigenvalues with nonnegative real part")
    if np.any(np.abs(w.imag[idx]) > 1e-8 * scale):
        raise FitError("leading eigenvalues are genuinely complex; increase beta")
    sig2 = w.real[idx]
    V = np.real(vecs[:, idx])
    GM = G @ M / m
    norms = np.einsum("ij,ij->j", V, GM @ V)
    if np.any(norms <= 0):
        raise FitError("eigenvector normalization is not positive; G_xu may be indefinite")
    V = V / np.sqrt(norms)
    theta = G @ V @ V.T / m**2
    op = LearnedOperator(
        theta,
        dataset,
        kx,
        ku,
        {"name": "rrr", "beta": float(beta), "rank": int(rank)},
        grams,
    )
    return op, RRRSolution(sig2, V)


def fit(dataset: SnapshotDataset, kx: RadialKernelSpec, ku: PolicyKernelSpec, method="kernel_edmd", **kw):
    """Assemble Grams and fit in one call.

    ``method`` is ``"kernel_edmd"`` (keyword ``jitter``) or ``"rrr"``
    (keywords ``rank`` and either ``beta`` or ``beta_factor``, the latter
    multiplying the largest eigenvalue of ``G_xu``).
    """
    grams = assemble(dataset, kx, ku)
    if method == "kernel_edmd":
        return fit_kernel_edmd(grams, kw.get("jitter"), dataset, kx, ku)
    if method == "rrr":
        beta = kw.get("beta")
        if beta is None:
            beta = kw["beta_factor"] * float(np.linalg.eigvalsh(grams.G_xu)[-1])
        return fit_rrr(grams, beta, kw["rank"], dataset, kx, ku)[0]
    raise InputError(f"unknown fitting method {method!r}")


def numerical_rank(theta, rtol: float = 1e-8) -> int:
    s = np.linalg.svd(np.asarray(theta), compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def generalization_bound(m: int, delta: float, beta_reg: float, rank: int) -> float:
    """High-probability gap between generalization and empirical loss of RRR."""
    if m < 1 or not 0 < delta < 1 or beta_reg < 0 or rank < 1:
        raise InputError("need m >= 1, 0 < delta < 1, beta_reg >= 0, rank >= 1")
    l6 = math.log(6 / delta)
    l12 = math.log(12 * m**2 / delta)
    first = l6 / m + math.sqrt(8 / m * l6)
    second = beta_reg * (beta_reg + 2 * math.sqrt(rank)) * (6 / m * l12 + math.sqrt(9 / m * l12))
    return first + second


def empirical_loss(operator_or_theta, grams: GramSet) -> float:
    """Unregularized empirical loss of the operator on the training pairs."""
    theta = getattr(operator_or_theta, "theta", operator_or_theta)
    theta = np.asarray(theta, dtype=float)
    m = grams.m
    if theta.shape != (m, m):
        raise InputError(f"theta has shape {theta.shape}, grams have m={m}")
    E = np.eye(m) - theta @ grams.G_xu
    loss = float(np.einsum("ij,ij->", E, grams.G_yy @ E)) / m
    return max(loss, 0.0)


def hs_norm_squared(operator: LearnedOperator) -> float:
    """Squared Hilbert-Schmidt norm ``trace(theta^T G_yy theta G_xu)``."""
    T = operator.theta
    g = operator.grams
    return float(np.einsum("ij,ij->", T, g.G_yy @ T @ g.G_xu))


def save_operator(operator: LearnedOperator, path, dataset_dir, metadata=None) -> Path:
    """Write theta plus everything needed to rebuild the operator.

    ``dataset_dir`` must hold the CSVs written by :func:`koopnem.gram.save_dataset`.
    """
    path = Path(path)
    meta = {
        "format": "koopnem-operator-1",
        "method": operator.method,
        "state_kernel": operator.kx.to_dict(),
        "policy_kernel": operator.ku.to_dict(),
        "dataset_dir": str(Path(dataset_dir)),
        **(metadata or {}),
    }
    cols = [f"theta{j + 1}" for j in range(operator.m)]
    return write_csv(path, cols, operator.theta.tolist(), meta)


def _kernel_from_dict(d) -> RadialKernelSpec:
    if d["family"] == "wendland":
        return RadialKernelSpec.wendland(d["n"], d["k"], d["sigma"])
    return RadialKernelSpec.gaussian(d["sigma"])


def load_operator(path, dataset_dir=None) -> LearnedOperator:
    path = Path(path)
    _, theta, meta = read_csv(path)
    if meta.get("format") != "koopnem-operator-1":
        raise InputError(f"{path} is not a saved operator")
    ddir = Path(dataset_dir or meta["dataset_dir"])
    if not ddir.is_absolute() and not ddir.exists():
        ddir = path.parent / ddir
    dataset = load_dataset(ddir)
    kx = _kernel_from_dict(meta["state_kernel"])
    pk = meta["policy_kernel"]
    ku = PolicyKernelSpec(pk["sigma"], pk["parameter_dimension"])
    grams = assemble(dataset, kx, ku)
    return LearnedOperator(theta, dataset, kx, ku, meta["method"], grams)
