"""Radial, policy-parameter and product kernels.

Wendland radial functions are built once as exact piecewise polynomials and
then evaluated with Horner's rule, so Gram assembly never re-integrates.
All kernels are normalized to unit value on the diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, InputError

__all__ = [
    "PiecewisePolynomial",
    "RadialKernelSpec",
    "PolicyKernelSpec",
    "build_wendland",
    "wendland_profile_coefficients",
    "kernel_eval",
    "policy_kernel_eval",
    "product_kernel_eval",
    "radial_matrix",
    "policy_matrix",
]

# Closed forms pinned in place of the recursion. The lowest-order
# one-dimensional kernel of the tank study is the truncated power
# max(1 - r/sigma, 0)**2 rather than the I-recursion output (1-r)^3 (3r+1).
_PUBLISHED_FORMS: dict[tuple[int, int], int] = {(1, 1): 2}


@dataclass(frozen=True)
class PiecewisePolynomial:
    """``(1 - r/support_radius)**vanishing_order * q(r)`` on ``[0, support_radius)``,
    identically zero beyond it.

    ``coefficients[p]`` multiplies ``r**p`` in the cofactor ``q``. Keeping the
    root at the support edge factored out avoids cancellation near it.
    """

    coefficients: tuple[float, ...]
    support_radius: float
    vanishing_order: int = 0

    def __post_init__(self):
        if not self.support_radius > 0:
            raise ConfigurationError(f"support_radius must be positive, got {self.support_radius}")
        if len(self.coefficients) == 0:
            raise ConfigurationError("empty coefficient list")
        if self.vanishing_order < 0:
            raise ConfigurationError("vanishing_order must be nonnegative")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < self.support_radius
        ri = r[inside]
        acc = np.full_like(ri, self.coefficients[-1])
        for c in reversed(self.coefficients[:-1]):
            acc = acc * ri + c
        if self.vanishing_order:
            acc = acc * (1.0 - ri / self.support_radius) ** self.vanishing_order
        out[inside] = acc
        return out if out.ndim else float(out)


def _divide_out_edge_root(coeffs: list[Fraction]) -> tuple[list[Fraction], int]:
    # write p(s) = (1 - s)^q c(s) with c(1) != 0, exactly
    q = 0
    while len(coeffs) > 1 and sum(coeffs) == 0:
        # p(s) = (1 - s) c(s)  =>  c_j = sum_{i <= j} p_i
        quotient, acc = [], Fraction(0)
        for c in coeffs[:-1]:
            acc += c
            quotient.append(acc)
        coeffs, q = quotient, q + 1
    return coeffs, q


def _truncated_power(l: int) -> list[Fraction]:
    # (1 - s)^l in ascending powers of s
    return [Fraction(comb(l, p) * (-1) ** p) for p in range(l + 1)]


def _apply_integral_operator(coeffs: list[Fraction]) -> list[Fraction]:
    # (I g)(s) = int_s^1 t g(t) dt for g supported on [0, 1]
    antideriv = [Fraction(0)] * (len(coeffs) + 2)
    for p, c in enumerate(coeffs):
        antideriv[p + 2] = c / (p + 2)
    at_one = sum(antideriv)
    return [at_one - antideriv[0]] + [-a for a in antideriv[1:]]


def wendland_profile_coefficients(n: int, k: int, *, published: bool = True) -> list[Fraction]:
    """Exact coefficients of the unit-support profile in ``s = r / sigma``.

    The profile is scaled so that its value at ``s = 0`` is one. With
    ``published=False`` the I-recursion is used for every ``(n, k)``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigurationError(f"Wendland n must be a positive integer, got {n!r}")
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ConfigurationError(f"Wendland k must be a nonnegative integer, got {k!r}")
    if k == 0 and n < 3:
        raise ConfigurationError(f"Wendland k=0 requires n >= 3, got n={n}")
    if published and (n, k) in _PUBLISHED_FORMS:
        coeffs = _truncated_power(_PUBLISHED_FORMS[(n, k)])
    else:
        coeffs = _truncated_power(n // 2 + k + 1)
        for _ in range(k):
            coeffs = _apply_integral_operator(coeffs)
    c0 = coeffs[0]
    return [c / c0 for c in coeffs]


def build_wendland(n: int, k: int, sigma: float, *, published: bool = True) -> PiecewisePolynomial:
    """Normalized Wendland radial function with support ``[0, sigma]``.

    >>> rho = build_wendland(3, 1, 1.0)
    >>> round(rho(0.5), 12)
    0.1875
    """
    if not (np.isfinite(sigma) and sigma > 0):
        raise ConfigurationError(f"Wendland sigma must be positive, got {sigma!r}")
    profile = wendland_profile_coefficients(n, k, published=published)
    cofactor, order = _divide_out_edge_root(profile)
    coefficients = tuple(float(c) / sigma**p for p, c in enumerate(cofactor))
    return PiecewisePolynomial(coefficients, float(sigma), order)


@dataclass(frozen=True)
class RadialKernelSpec:
    """Radial kernel on the (pre-scaled) state space.

    ``family`` is ``"wendland"`` (uses ``n`` and ``k``) or ``"gaussian"``.
    """

    family: str
    bandwidth: float
    n: int = 1
    k: int = 1
    profile: PiecewisePolynomial | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in ("wendland", "gaussian"):
            raise ConfigurationError(f"unknown radial kernel family {self.family!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ConfigurationError(f"kernel bandwidth must be positive, got {self.bandwidth!r}")
        if self.family == "wendland":
            object.__setattr__(self, "profile", build_wendland(self.n, self.k, self.bandwidth))

    @classmethod
    def wendland(cls, n: int, k: int, sigma: float) -> "RadialKernelSpec":
        return cls("wendland", float(sigma), int(n), int(k))

    @classmethod
    def gaussian(cls, sigma: float) -> "RadialKernelSpec":
        return cls("gaussian", float(sigma))

    @property
    def normalization(self) -> float:
        return 1.0

    @property
    def compact(self) -> bool:
        return self.family == "wendland"

    def radial(self, r):
        if self.family == "gaussian":
            r = np.asarray(r, dtype=float)
            return np.exp(-(r**2) / self.bandwidth**2)
        return self.profile(r)

    def to_dict(self) -> dict:
        d = {"family": self.family, "sigma": self.bandwidth}
        if self.family == "wendland":
            d.update(n=self.n, k=self.k)
        return d


@dataclass(frozen=True)
class PolicyKernelSpec:
    """Gaussian kernel on policy parameters, ``exp(-|a - a'|^2 / sigma^2)``."""

    bandwidth: float
    parameter_dimension: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ConfigurationError(f"policy kernel bandwidth must be positive, got {self.bandwidth!r}")
        if self.parameter_dimension < 1:
            raise ConfigurationError("parameter_dimension must be >= 1")

    def to_dict(self) -> dict:
        return {"sigma": self.bandwidth, "parameter_dimension": self.parameter_dimension}


def _as_vectors(a, b):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def kernel_eval(spec: RadialKernelSpec, x, x_prime) -> float:
    x, x_prime = _as_vectors(x, x_prime)
    return float(spec.radial(np.linalg.norm(x - x_prime)))


def policy_kernel_eval(spec: PolicyKernelSpec, alpha, alpha_prime) -> float:
    alpha, alpha_prime = _as_vectors(alpha, alpha_prime)
    if alpha.size != spec.parameter_dimension:
        raise InputError(
            f"policy parameter has dimension {alpha.size}, kernel expects {spec.parameter_dimension}"
        )
    d2 = float(np.sum((alpha - alpha_prime) ** 2))
    return float(np.exp(-d2 / spec.bandwidth**2))


def product_kernel_eval(kx: RadialKernelSpec, ku: PolicyKernelSpec, pair, pair_prime) -> float:
    (x, alpha), (x_prime, alpha_prime) = pair, pair_prime
    return kernel_eval(kx, x, x_prime) * policy_kernel_eval(ku, alpha, alpha_prime)


def _as_rows(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def radial_matrix(spec: RadialKernelSpec, A, B=None) -> np.ndarray:
    """Matrix ``K[i, j] = kappa(A[i], B[j])``; exactly symmetric when ``B`` is omitted."""
    A = _as_rows(A)
    if B is None:
        D = cdist(A, A)
        K = spec.radial(D)
        iu = np.triu_indices(len(A), 1)
        K[(iu[1], iu[0])] = K[iu]
        np.fill_diagonal(K, 1.0)
        return K
    B = _as_rows(B)
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return spec.radial(cdist(A, B))


def policy_matrix(spec: PolicyKernelSpec, A, B=None) -> np.ndarray:
    A = _as_rows(A)
    Bm = A if B is None else _as_rows(B)
    if A.shape[1] != spec.parameter_dimension or Bm.shape[1] != spec.parameter_dimension:
        raise InputError(
            f"policy parameters have dimension {A.shape[1]}/{Bm.shape[1]}, "
            f"kernel expects {spec.parameter_dimension}"
        )
    K = np.exp(-cdist(A, Bm, "sqeuclidean") / spec.bandwidth**2)
    if B is None:
        K = np.triu(K) + np.triu(K, 1).T
    return K
