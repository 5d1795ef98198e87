"""Asymptotic quantities behind the intervals and tests.

Everything is expressed through eigen-coefficients: ``b_coeffs`` has shape
(p, m) and holds <B_k, phi_l> for B_k(z) = E[X_k | Z = z]; ``f0_coeffs`` has
shape (m,).  Both are aligned with ``eigensystems.modes(kernel, m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg

from . import eigensystems as es
from .eigensystems import EigenKernel, Family


class Objective(str, Enum):
    MINIMAX_MSE = "minimax_mse"
    JOINT_CLT = "joint_clt"


@dataclass
class AsymptoticQuantities:
    omega: np.ndarray
    sigma_xx: np.ndarray
    b_coeffs: np.ndarray
    lam: float | None = None
    sigma_lambda: np.ndarray | None = None
    z0: float | None = None
    sigma2_z0: float | None = None
    gamma_z0: np.ndarray | None = None
    alpha_z0: np.ndarray | None = None
    w_lambda_f0_z0: float | None = None
    source: str = "analytic"
    regime: str = ""
    b_second_moment: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        self.sigma_xx = np.atleast_2d(np.asarray(self.sigma_xx, dtype=float))
        self.b_coeffs = np.atleast_2d(np.asarray(self.b_coeffs, dtype=float))


def _trim(kernel: EigenKernel, coeffs: np.ndarray, lam: float) -> int:
    # shrunk series converge fast; only the modes the tail rule asks for are summed
    m = coeffs.shape[-1]
    if lam > 0:
        try:
            m = min(m, es.n_modes(kernel, lam))
        except es.TruncationError:
            pass
    return m


def _expand(kernel: EigenKernel, z, coef: np.ndarray, block: int = 512) -> np.ndarray:
    """features(z) @ coef.T, evaluated in blocks of points to bound memory."""
    m = coef.shape[1]
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or len(z) <= block:
        return es.features(kernel, z, m) @ coef.T
    return np.concatenate([es.features(kernel, z[i:i + block], m) @ coef.T
                           for i in range(0, len(z), block)])


def representer_A(b_coeffs, kernel: EigenKernel, lam: float, z) -> np.ndarray:
    """A_k(z) = sum_l <B_k, phi_l> / (1 + lam/mu_l) phi_l(z); shape z.shape + (p,)."""
    b = np.atleast_2d(np.asarray(b_coeffs, dtype=float))
    m = _trim(kernel, b, lam)
    mu = es.eigenvalues(kernel, m)
    return _expand(kernel, z, b[:, :m] * es.shrinkage(mu, lam))


def w_lambda_A(b_coeffs, kernel: EigenKernel, lam: float, z) -> np.ndarray:
    b = np.atleast_2d(np.asarray(b_coeffs, dtype=float))
    m = _trim(kernel, b, lam)
    mu = es.eigenvalues(kernel, m)
    return _expand(kernel, z, b[:, :m] * es.shrinkage(mu, lam) * es.w_multiplier(mu, lam))


def sigma_lambda_matrix(b_coeffs, kernel: EigenKernel, lam: float,
                        b_second_moment=None) -> np.ndarray:
    """[Sigma_lam]_jk = sum_l (lam/mu_l)/(1 + lam/mu_l) <B_j,phi_l><B_k,phi_l>.

    With ``b_second_moment`` = E[B B'] the complement E[B B'] - sum_l b b'/(1 + lam/mu_l)
    is used instead; its terms decay like mu_l, so truncating b costs nothing.
    """
    b = np.atleast_2d(np.asarray(b_coeffs, dtype=float))
    if lam == 0:
        return np.zeros((b.shape[0], b.shape[0]))
    mu = es.eigenvalues(kernel, b.shape[1])
    if math.isinf(lam):
        w = np.where(np.isinf(mu), 0.0, 1.0)
    else:
        w = es.w_multiplier(mu, lam)
    if b_second_moment is not None and not math.isinf(lam):
        out = np.atleast_2d(b_second_moment) - (b * (1.0 - w)) @ b.T
    else:
        out = (b * w) @ b.T
    return 0.5 * (out + out.T)


def pointwise_variance(kernel: EigenKernel, lam: float, z0: float) -> float:
    """d(lam)^{-1} sum_l phi_l(z0)^2 / (1 + lam/mu_l)^2, the finite-lambda sigma^2_{z0}."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    m = es.n_modes(kernel, lam)
    sh = es.shrinkage(es.eigenvalues(kernel, m), lam)
    phi = es.features(kernel, np.asarray([z0], dtype=float), m)[0]
    return float(math.fsum(phi * phi * sh * sh) / math.fsum(sh))


def sobolev_sigma2_limit(nu: float) -> float:
    """Closed form pi / (2 nu sin(pi / (2 nu))) used for periodic Sobolev intervals."""
    return math.pi / (2.0 * nu * math.sin(math.pi / (2.0 * nu)))


def bias_at(f0_coeffs, kernel: EigenKernel, lam: float, z0) -> np.ndarray | float:
    """W_lam f0 evaluated at z0: sum_l lam theta_l / (mu_l + lam) phi_l(z0)."""
    theta = np.asarray(f0_coeffs, dtype=float)
    mu = es.eigenvalues(kernel, theta.size)
    vals = es.features(kernel, z0, theta.size) @ (theta * es.w_multiplier(mu, lam))
    return float(vals) if np.ndim(vals) == 0 else vals


def l_lambda_f0(f0_coeffs, b_coeffs, omega, kernel: EigenKernel, lam: float,
                b_second_moment=None) -> np.ndarray:
    """Parametric bias -(Omega + Sigma_lam)^{-1} <B, W_lam f0>."""
    theta = np.asarray(f0_coeffs, dtype=float)
    b = np.atleast_2d(np.asarray(b_coeffs, dtype=float))
    m = min(theta.size, b.shape[1])
    w = es.w_multiplier(es.eigenvalues(kernel, m), lam)
    inner = b[:, :m] @ (w * theta[:m])
    mat = np.atleast_2d(omega) + sigma_lambda_matrix(b, kernel, lam, b_second_moment)
    return -linalg.solve(mat, inner, assume_a="pos")


def n_lambda_f0(f0_coeffs, b_coeffs, omega, kernel: EigenKernel, lam: float, z,
                b_second_moment=None) -> np.ndarray:
    """Nonparametric bias W_lam f0(z) - A(z)' L_lam f0."""
    ll = l_lambda_f0(f0_coeffs, b_coeffs, omega, kernel, lam, b_second_moment)
    return bias_at(f0_coeffs, kernel, lam, z) - representer_A(b_coeffs, kernel, lam, z) @ ll


def score_decomposition(x, z: float, quantities: AsymptoticQuantities, kernel: EigenKernel,
                        lam: float):
    """Score decomposition R_u = (L_u, N_u) at u = (x, z).

    Returns L_u as a p-vector and N_u as a callable of z'.
    """
    sig_l = quantities.sigma_lambda
    if sig_l is None or quantities.lam != lam:
        sig_l = sigma_lambda_matrix(quantities.b_coeffs, kernel, lam, quantities.b_second_moment)
    mat = quantities.omega + sig_l
    try:
        lu_factor = linalg.cho_factor(mat)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Omega + Sigma_lambda is singular") from exc
    a_z = representer_A(quantities.b_coeffs, kernel, lam, np.asarray([z], dtype=float))[0]
    l_u = linalg.cho_solve(lu_factor, np.asarray(x, dtype=float) - a_z)
    b = quantities.b_coeffs

    def n_u(zp):
        zp = np.asarray(zp, dtype=float)
        return es.gram(kernel, z, zp, lam).reshape(zp.shape) - representer_A(b, kernel, lam, zp) @ l_u

    return l_u, n_u


proposition23_operators = score_decomposition


def l_u_batch(x: np.ndarray, z: np.ndarray, quantities: AsymptoticQuantities, kernel: EigenKernel,
              lam: float) -> np.ndarray:
    """L_u for many points at once; rows of ``x`` pair with entries of ``z``."""
    mat = quantities.omega + sigma_lambda_matrix(quantities.b_coeffs, kernel, lam,
                                                 quantities.b_second_moment)
    a = representer_A(quantities.b_coeffs, kernel, lam, z)
    return linalg.solve(mat, (np.atleast_2d(x) - a).T, assume_a="pos").T


def estimate_b_coeffs(x: np.ndarray, z: np.ndarray, kernel: EigenKernel,
                      n_basis: int = 25) -> np.ndarray:
    """Series regression of each X_k on the leading eigenfunctions of Z."""
    x = np.asarray(x, dtype=float).reshape(len(z), -1)
    m = n_basis if kernel.family is not Family.FINITE_RANK else min(n_basis, kernel.rank)
    phi = es.features(kernel, z, m)
    coef, *_ = np.linalg.lstsq(phi, x, rcond=None)
    return coef.T


def plugin_quantities(x: np.ndarray, z: np.ndarray, kernel: EigenKernel, lam: float,
                      z0: float | None = None, n_basis: int = 25) -> AsymptoticQuantities:
    """Data-based Omega, Sigma and B for designs without an analytic E[X | Z]."""
    x = np.asarray(x, dtype=float).reshape(len(z), -1)
    b = estimate_b_coeffs(x, z, kernel, n_basis)
    resid = x - es.features(kernel, z, b.shape[1]) @ b.T
    omega = resid.T @ resid / len(z)
    sigma_xx = x.T @ x / len(z)
    q = AsymptoticQuantities(omega, sigma_xx, b, source="monte_carlo")
    return complete(q, kernel, lam, z0)


def complete(q: AsymptoticQuantities, kernel: EigenKernel, lam: float, z0: float | None = None,
             sigma2_z0: float | None = None, f0_coeffs=None) -> AsymptoticQuantities:
    """Fill the lambda- and z0-dependent fields of ``q``."""
    q.lam = lam
    q.sigma_lambda = sigma_lambda_matrix(q.b_coeffs, kernel, lam, q.b_second_moment)
    if z0 is not None:
        d = es.effective_dimension(kernel, lam)
        zz = np.asarray([z0], dtype=float)
        q.z0 = z0
        q.sigma2_z0 = pointwise_variance(kernel, lam, z0) if sigma2_z0 is None else sigma2_z0
        q.gamma_z0 = -representer_A(q.b_coeffs, kernel, lam, zz)[0] / math.sqrt(d)
        q.alpha_z0 = w_lambda_A(q.b_coeffs, kernel, lam, zz)[0] / math.sqrt(d)
        if f0_coeffs is not None:
            q.w_lambda_f0_z0 = float(bias_at(f0_coeffs, kernel, lam, zz)[0])
        q.regime = ("finite d(lambda): gamma, alpha nonzero in the limit"
                    if kernel.family is Family.FINITE_RANK
                    else "d(lambda) -> inf: gamma, alpha vanish in the limit")
    return q


def lambda_rule(kernel: EigenKernel, N: int, objective: Objective | str = Objective.MINIMAX_MSE,
                scale: float = 1.0) -> float:
    """Family-specific rate for lambda; ``scale`` multiplies the pure rate."""
    if N < 2:
        raise ValueError("N must be at least 2")
    objective = Objective(objective)
    if kernel.family is Family.FINITE_RANK:
        rate = kernel.rank / N
    elif kernel.family is Family.GAUSSIAN_EXP:
        rate = math.log(N) ** (1.0 / kernel.decay_p) / N
    else:
        nu = kernel.order_nu
        if objective is Objective.MINIMAX_MSE:
            rate = N ** (-2.0 * nu / (2.0 * nu + 1.0))
        else:
            rate = N ** (-2.0 * nu / (4.0 * nu + 1.0))
    return scale * rate


@dataclass(frozen=True)
class SBounds:
    upper: float
    lower: float
    upper_formula: str
    lower_formula: str
    guidance_only: bool = True


def s_bounds(kernel: EigenKernel, N: int, lam: float) -> SBounds:
    """Leading-order s limits for oracle aggregation (upper) and boosting (lower).

    Constants are unknown, so the numbers are orders of magnitude only.
    """
    log_n = math.log(N)
    if kernel.family is Family.SOBOLEV_PERIODIC:
        nu = kernel.order_nu
        expo = (8 * nu * nu - 8 * nu + 1) / (2 * nu * (4 * nu + 1))
        upper = N ** expo * log_n ** -6
        up_f = f"N^{expo:.6g} log^-6 N"
    elif kernel.family is Family.GAUSSIAN_EXP:
        p = kernel.decay_p
        upper = N / (log_n ** 6 * math.log(1.0 / lam) ** ((p + 4) / p))
        up_f = f"N / (log^6 N log^{(p + 4) / p:.6g}(1/lambda))"
    else:
        upper = N / (math.sqrt(math.log(1.0 / lam)) * log_n ** 6)
        up_f = "N / (sqrt(log(1/lambda)) log^6 N)"
    if kernel.family is Family.FINITE_RANK:
        lower = kernel.rank ** 2 * log_n ** 4
        lo_f = "r^2 log^4 N"
    else:
        lower = es.effective_dimension(kernel, lam) ** 2 * log_n ** 4
        lo_f = "d(lambda)^2 log^4 N"
    return SBounds(upper, lower, up_f, lo_f)
