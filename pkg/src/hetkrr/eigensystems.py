"""Kernel families described by their Mercer eigensystems.

Every kernel here is K(z1, z2) = sum_l mu_l phi_l(z1) phi_l(z2) with a closed
form for the eigenvalues mu_l and evaluable eigenfunctions phi_l.  Series are
truncated adaptively: the number of modes is the smallest count whose analytic
tail bound falls below ``abs_tol``, capped by ``EigenKernel.truncation``.

Mode indexing follows the closed forms.  The periodic Sobolev family starts at
l = 0 (the unpenalized constant, mu_0 = inf); the other families start at l = 1.
Coefficient vectors passed to the helpers in this module are aligned with
``modes(kernel, m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

ETA = (math.sqrt(5.0) - 1.0) / 2.0
# mu_l = eta^(2l+1) = eta * exp(-GAUSS_ALPHA * l)
GAUSS_ALPHA = 2.0 * math.log(1.0 / ETA)
GAUSS_C_PHI = 1.336
ABS_TOL = 1e-10
DEFAULT_TRUNCATION = 1 << 21


class Family(str, Enum):
    FINITE_RANK = "finite_rank"
    GAUSSIAN_EXP = "gaussian_exp"
    SOBOLEV_PERIODIC = "sobolev_periodic"


class TruncationError(ValueError):
    """Raised when a series needs more modes than the kernel allows."""


class DomainError(ValueError):
    """Raised when an evaluation point lies outside the kernel's domain."""


@dataclass(frozen=True)
class EigenKernel:
    family: Family
    rank: int | None = None
    order_nu: float = 2.0
    decay_p: float = 1.0
    truncation: int = DEFAULT_TRUNCATION
    domain: tuple[float, float] | None = None
    dictionary: str = "polynomial"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.truncation < 1:
            raise ValueError("truncation must be a positive integer")
        if self.family is Family.SOBOLEV_PERIODIC:
            if not self.order_nu > 0.5:
                raise ValueError("periodic Sobolev order must exceed 1/2 for a finite d(lambda)")
            if self.domain is None:
                object.__setattr__(self, "domain", (0.0, 1.0))
        elif self.family is Family.GAUSSIAN_EXP:
            if not self.decay_p > 0:
                raise ValueError("decay_p must be positive")
        else:
            if self.rank is None or self.rank < 1:
                raise ValueError("finite-rank kernel needs rank >= 1")
            if self.dictionary not in ("polynomial", "linear"):
                raise ValueError(f"unknown dictionary {self.dictionary!r}")
            w = self.weights if self.weights is not None else (1.0,) * self.rank
            w = tuple(float(v) for v in w)
            if len(w) != self.rank:
                raise ValueError("weights must have one entry per rank")
            if any(v <= 0 for v in w) or any(a < b for a, b in zip(w, w[1:])):
                raise ValueError("finite-rank weights must be positive and nonincreasing")
            object.__setattr__(self, "weights", w)
        if self.domain is not None:
            lo, hi = (float(v) for v in self.domain)
            if not hi > lo:
                raise ValueError("domain must satisfy z_min < z_max")
            object.__setattr__(self, "domain", (lo, hi))

    @classmethod
    def sobolev(cls, nu=2.0, domain=(0.0, 1.0), truncation=DEFAULT_TRUNCATION):
        return cls(Family.SOBOLEV_PERIODIC, order_nu=nu, domain=domain, truncation=truncation)

    @classmethod
    def gaussian(cls, p=1.0, domain=None, truncation=DEFAULT_TRUNCATION):
        return cls(Family.GAUSSIAN_EXP, decay_p=p, domain=domain, truncation=truncation)

    @classmethod
    def finite_rank(cls, rank, dictionary="polynomial", weights=None, domain=None):
        return cls(Family.FINITE_RANK, rank=rank, dictionary=dictionary, weights=weights,
                   domain=domain)

    @property
    def first_index(self) -> int:
        return 0 if self.family is Family.SOBOLEV_PERIODIC else 1

    @property
    def n_null(self) -> int:
        """Number of unpenalized (mu = inf) modes; they lead the mode list."""
        return 1 if self.family is Family.SOBOLEV_PERIODIC else 0

    @property
    def c_phi(self) -> float:
        """Uniform bound on |phi_l| over the domain."""
        if self.family is Family.SOBOLEV_PERIODIC:
            return math.sqrt(2.0)
        if self.family is Family.GAUSSIAN_EXP:
            return GAUSS_C_PHI
        lo, hi = self.domain if self.domain is not None else (-1.0, 1.0)
        return max(1.0, abs(lo), abs(hi)) ** max(self.rank - 1, 1)

    def describe(self) -> str:
        if self.family is Family.SOBOLEV_PERIODIC:
            return f"sobolev_periodic(nu={self.order_nu:g}, domain={self.domain})"
        if self.family is Family.GAUSSIAN_EXP:
            return f"gaussian_exp(p={self.decay_p:g})"
        return f"finite_rank({self.dictionary}, r={self.rank})"


def modes(kernel: EigenKernel, m: int) -> np.ndarray:
    return np.arange(kernel.first_index, kernel.first_index + m)


def eigenvalues(kernel: EigenKernel, m: int) -> np.ndarray:
    """Eigenvalues of the first ``m`` modes (mu_0 = inf for periodic Sobolev)."""
    ell = modes(kernel, m)
    if kernel.family is Family.SOBOLEV_PERIODIC:
        freq = np.where(ell % 2 == 1, ell + 1, ell).astype(float)
        with np.errstate(divide="ignore"):
            mu = (freq * np.pi) ** (-2.0 * kernel.order_nu)
        mu[ell == 0] = np.inf
        return mu
    if kernel.family is Family.GAUSSIAN_EXP:
        if kernel.decay_p == 1.0:
            return ETA ** (2.0 * ell + 1.0)
        return ETA * np.exp(-GAUSS_ALPHA * ell.astype(float) ** kernel.decay_p)
    w = np.asarray(kernel.weights, dtype=float)
    out = np.zeros(m)
    k = min(m, kernel.rank)
    out[:k] = w[:k]
    return out


def eigenvalue(kernel: EigenKernel, ell: int) -> float:
    if ell < kernel.first_index:
        raise ValueError(f"mode index must be >= {kernel.first_index}")
    if kernel.family is Family.FINITE_RANK:
        return float(kernel.weights[ell - 1]) if ell <= kernel.rank else 0.0
    if ell - kernel.first_index + 1 > kernel.truncation:
        raise TruncationError(f"mode {ell} beyond truncation {kernel.truncation}")
    return float(eigenvalues(kernel, ell - kernel.first_index + 1)[-1])


def map_domain(kernel: EigenKernel, z) -> np.ndarray:
    """Check ``z`` against the declared domain; periodic Sobolev maps onto [0, 1]."""
    z = np.asarray(z, dtype=float)
    if kernel.domain is not None:
        lo, hi = kernel.domain
        slack = 1e-12 * (hi - lo)
        if np.any(z < lo - slack) or np.any(z > hi + slack):
            raise DomainError(f"z outside kernel domain [{lo}, {hi}]")
        if kernel.family is Family.SOBOLEV_PERIODIC:
            return (z - lo) / (hi - lo)
    return z


def _hermite_functions(y: np.ndarray, m: int) -> np.ndarray:
    # psi_k = H_k(y) exp(-y^2/2) / sqrt(2^k k!) via the normalized recurrence
    out = np.empty(y.shape + (m,))
    prev = np.exp(-0.5 * y * y)
    out[..., 0] = prev
    if m > 1:
        cur = math.sqrt(2.0) * y * prev
        out[..., 1] = cur
        for k in range(1, m - 1):
            nxt = math.sqrt(2.0 / (k + 1)) * y * cur - math.sqrt(k / (k + 1)) * prev
            out[..., k + 1] = nxt
            prev, cur = cur, nxt
    return out


def features(kernel: EigenKernel, z, m: int) -> np.ndarray:
    """Matrix of eigenfunction values, shape ``z.shape + (m,)``."""
    if kernel.family is Family.FINITE_RANK and kernel.dictionary == "linear":
        z = np.asarray(z, dtype=float)
        if kernel.rank > 1:
            if z.shape[-1] != kernel.rank:
                raise ValueError("linear dictionary expects vectors of length rank")
            return z[..., :m]
        return map_domain(kernel, z)[..., None][..., :m]
    t = map_domain(kernel, z)
    if kernel.family is Family.SOBOLEV_PERIODIC:
        ell = modes(kernel, m)
        freq = np.where(ell % 2 == 1, ell + 1, ell) // 2
        ang = 2.0 * np.pi * t[..., None] * freq
        phi = np.where(ell % 2 == 1, np.sin(ang), np.cos(ang)) * math.sqrt(2.0)
        phi[..., ell == 0] = 1.0
        return phi
    if kernel.family is Family.GAUSSIAN_EXP:
        y = math.sqrt(math.sqrt(5.0) / 2.0) * t
        # exp(-y^2/2) is folded into psi; the remaining weight is exp(+t^2/4)
        pref = (math.sqrt(5.0) / 4.0) ** 0.25 * math.sqrt(2.0)
        return pref * _hermite_functions(y, m) * np.exp(0.25 * t * t)[..., None]
    m_eff = min(m, kernel.rank)
    out = np.zeros(t.shape + (m,))
    out[..., :m_eff] = t[..., None] ** np.arange(m_eff)
    return out


def eigenfunction(kernel: EigenKernel, ell: int, z):
    if ell < kernel.first_index:
        raise ValueError(f"mode index must be >= {kernel.first_index}")
    if kernel.family is Family.FINITE_RANK and ell > kernel.rank:
        return np.zeros_like(np.asarray(z, dtype=float))
    vals = features(kernel, z, ell - kernel.first_index + 1)[..., -1]
    return vals if np.ndim(vals) else float(vals)


def _tail_sum(kernel: EigenKernel, m: int) -> float:
    """Upper bound on sum of mu_l over the modes after the first ``m``."""
    if kernel.family is Family.FINITE_RANK:
        return 0.0 if m >= kernel.rank else math.inf
    if kernel.family is Family.SOBOLEV_PERIODIC:
        k = (m - 1) // 2  # complete frequencies kept
        if k < 1:
            return math.inf
        nu2 = 2.0 * kernel.order_nu
        return 2.0 * (2.0 * np.pi) ** (-nu2) * k ** (1.0 - nu2) / (nu2 - 1.0)
    p = kernel.decay_p
    upper = float(m)  # modes 1..m kept; integral bound from x = m
    return ETA * special.gamma(1.0 / p) * special.gammaincc(1.0 / p, GAUSS_ALPHA * upper ** p) / (
        p * GAUSS_ALPHA ** (1.0 / p))


def n_modes(kernel: EigenKernel, lam: float = 0.0, abs_tol: float = ABS_TOL) -> int:
    """Smallest mode count whose certified tail is below ``abs_tol``.

    For ``lam > 0`` the bounded series is sum 1/(1 + lam/mu_l) <= sum mu_l/lam;
    for ``lam = 0`` it is the Mercer sum sum mu_l phi_l^2 <= c_phi^2 sum mu_l.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if kernel.family is Family.FINITE_RANK:
        return kernel.rank
    budget = abs_tol * lam if lam > 0 else abs_tol / kernel.c_phi ** 2
    if kernel.family is Family.SOBOLEV_PERIODIC:
        nu2 = 2.0 * kernel.order_nu
        k = (2.0 * (2.0 * np.pi) ** (-nu2) / ((nu2 - 1.0) * budget)) ** (1.0 / (nu2 - 1.0))
        m = 1 + 2 * max(1, math.ceil(k))
    else:
        lo, hi = 1, 2
        while _tail_sum(kernel, hi) > budget:
            lo, hi = hi, hi * 2
            if hi > 4 * kernel.truncation:
                break
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _tail_sum(kernel, mid) > budget:
                lo = mid
            else:
                hi = mid
        m = hi
    if m > kernel.truncation:
        raise TruncationError(
            f"{kernel.describe()} needs {m} modes at lambda={lam:g}; truncation is {kernel.truncation}")
    return m


def shrinkage(mu: np.ndarray, lam: float) -> np.ndarray:
    """1 / (1 + lam/mu), equal to 1 on unpenalized modes."""
    mu = np.asarray(mu, dtype=float)
    if lam == 0:
        return np.ones_like(mu)
    with np.errstate(invalid="ignore"):
        return np.where(np.isinf(mu), 1.0, mu / (mu + lam))


def w_multiplier(mu: np.ndarray, lam: float) -> np.ndarray:
    """lam / (lam + mu), the eigenvalues of W_lambda; 0 on unpenalized modes."""
    return 1.0 - shrinkage(mu, lam)


def effective_dimension(kernel: EigenKernel, lam: float, abs_tol: float = ABS_TOL) -> float:
    if not lam > 0:
        raise ValueError("effective dimension needs lambda > 0")
    m = n_modes(kernel, lam, abs_tol)
    return float(math.fsum(shrinkage(eigenvalues(kernel, m), lam)))


def gram(kernel: EigenKernel, z1, z2, lam: float = 0.0, abs_tol: float = ABS_TOL):
    """K(z1, z2) for ``lam = 0`` (penalized modes only), K-tilde for ``lam > 0``.

    Broadcasts like an outer product over 1-D inputs; scalars give a float.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    m = n_modes(kernel, lam, abs_tol)
    mu = eigenvalues(kernel, m)
    if lam == 0:
        weight = np.where(np.isinf(mu), 0.0, mu)
    else:
        weight = shrinkage(mu, lam)
    scalar = np.ndim(z1) == 0 and np.ndim(z2) == 0
    if kernel.family is Family.FINITE_RANK and kernel.dictionary == "linear" and kernel.rank > 1:
        f1 = features(kernel, np.atleast_2d(z1), m)
        f2 = features(kernel, np.atleast_2d(z2), m)
        scalar = np.ndim(z1) == 1 and np.ndim(z2) == 1
    else:
        f1 = features(kernel, np.atleast_1d(z1), m)
        f2 = features(kernel, np.atleast_1d(z2), m)
    out = (f1 * weight) @ f2.T
    return float(out[0, 0]) if scalar else out


def apply_W_lambda(kernel: EigenKernel, coeffs, lam: float) -> np.ndarray:
    """Apply W_lambda to a function given by its eigen-coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    mu = eigenvalues(kernel, coeffs.shape[-1])
    return coeffs * w_multiplier(mu, lam)
