"""Partially linear kernel ridge regression on subpopulations.

Each subpopulation j solves

    min_{beta, f}  (1/n_j) sum_i (Y_i - X_i' beta - f(Z_i))^2 + lam ||f||_H^2

in closed form.  ``f`` is kept in representer form over the group's anchors
plus any unpenalized (null-space) modes of the kernel, and is also stored as
eigen-coefficients so that averages of fits evaluate cheaply.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import eigensystems as es
from .eigensystems import EigenKernel

log = logging.getLogger(__name__)

JITTERS = (0.0, 1e-12, 1e-10, 1e-8)


class RankDeficientError(np.linalg.LinAlgError):
    pass


class DegreesOfFreedomError(ValueError):
    pass


@dataclass(frozen=True)
class PLDataset:
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    group: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size == y.size and y.size > 0 else x.reshape(y.size, -1)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        g = np.asarray(self.group).reshape(-1)
        if not (len(y) == len(x) == len(z) == len(g)):
            raise ValueError("y, x, z, group must have the same number of rows")
        if g.size and (not np.issubdtype(g.dtype, np.integer) or g.min() < 1):
            raise ValueError("group ids must be positive integers")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "group", g.astype(np.int64))

    @property
    def N(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def groups(self) -> np.ndarray:
        return np.unique(self.group)

    @property
    def s(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> dict[int, int]:
        ids, counts = np.unique(self.group, return_counts=True)
        return {int(j): int(c) for j, c in zip(ids, counts)}

    def subset(self, j: int) -> "PLDataset":
        mask = self.group == j
        if not mask.any():
            raise KeyError(f"no rows for group {j}")
        return PLDataset(self.y[mask], self.x[mask], self.z[mask], self.group[mask])

    def validate(self, kernel: EigenKernel | None = None) -> None:
        for j, n_j in self.sizes.items():
            if n_j < self.p + 2:
                raise ValueError(f"group {j} has {n_j} rows; needs at least p + 2 = {self.p + 2}")
        if kernel is not None:
            es.map_domain(kernel, self.z)


@dataclass
class SubFit:
    group: int
    beta_hat: np.ndarray
    dual_coeffs: np.ndarray
    null_coeffs: np.ndarray
    anchors: np.ndarray
    lam: float
    trace_hat: float
    sigma2_hat: float
    kernel: EigenKernel
    coef_modes: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.anchors)

    def f_hat(self, z) -> np.ndarray:
        return es.features(self.kernel, z, len(self.coef_modes)) @ self.coef_modes

    def rkhs_norm2(self) -> float:
        """||f||_H^2 of the penalized part, dual' G dual."""
        m = len(self.coef_modes)
        mu = es.eigenvalues(self.kernel, m)
        pen = ~np.isinf(mu)
        return float(np.sum(self.coef_modes[pen] ** 2 / mu[pen]))


def _cholesky(a: np.ndarray):
    scale = max(float(np.mean(np.diag(a))), 1e-300)
    for jit in JITTERS:
        try:
            return linalg.cho_factor(a + jit * scale * np.eye(len(a)), lower=True)
        except linalg.LinAlgError:
            log.debug("cholesky failed with jitter %g", jit)
    raise np.linalg.LinAlgError("G + n*lam*I is not positive definite even with 1e-8 jitter")


def gram_parts(kernel: EigenKernel, z: np.ndarray):
    """Penalized Gram matrix, null-space design, and the feature data behind them."""
    m = es.n_modes(kernel, 0.0)
    mu = es.eigenvalues(kernel, m)
    phi = es.features(kernel, z, m)
    null = np.isinf(mu)
    pen_w = np.where(null, 0.0, mu)
    g = (phi * pen_w) @ phi.T
    g = 0.5 * (g + g.T)
    return g, phi[:, null], phi, pen_w


def fit_subpopulation(data_j: PLDataset, kernel: EigenKernel, lam: float,
                      group: int | None = None) -> SubFit:
    """Exact minimizer of the penalized least-squares problem on one group."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if group is None:
        group = int(data_j.group[0]) if data_j.N else 0
    y, x, z = data_j.y, data_j.x, data_j.z
    n, p = x.shape
    if n < p + 2:
        raise ValueError(f"group {group} has {n} rows; needs at least p + 2 = {p + 2}")
    g, t, phi, pen_w = gram_parts(kernel, z)
    chol = _cholesky(g + n * lam * np.eye(n))
    d = np.hstack([x, t])
    minv_d = linalg.cho_solve(chol, d)
    minv_y = linalg.cho_solve(chol, y)
    info = d.T @ minv_d
    info = 0.5 * (info + info.T)
    if d.shape[1]:
        cond = np.linalg.cond(info) if info.size else 1.0
        if not np.isfinite(cond) or cond > 1e13:
            raise RankDeficientError(f"group {group}: X'(I-S)X is singular (cond={cond:.3g})")
        gamma = linalg.solve(info, d.T @ minv_y, assume_a="pos")
    else:
        gamma = np.zeros(0)
    alpha = minv_y - minv_d @ gamma

    # trace of the hat matrix H = S + (I-S) D (D'(I-S)D)^{-1} D'(I-S)
    l_inv = linalg.solve_triangular(chol[0], np.eye(n), lower=True)
    nl = n * lam
    tr_s = n - nl * float(np.sum(l_inv * l_inv))
    tr_h = tr_s
    if d.shape[1]:
        tr_h += nl * float(np.trace(linalg.solve(info, minv_d.T @ minv_d, assume_a="pos")))
    resid = nl * alpha
    dof = n - tr_h
    if dof <= 0:
        raise DegreesOfFreedomError(f"group {group}: n_j - Tr(H) = {dof:.3g} <= 0")
    if dof < 1:
        warnings.warn(f"group {group}: n_j - Tr(H) = {dof:.3g} < 1; sigma2_hat undefined",
                      RuntimeWarning, stacklevel=2)
        sigma2 = float("nan")
    else:
        sigma2 = float(resid @ resid / dof)

    coef = pen_w * (phi.T @ alpha)
    n_null = t.shape[1]
    coef[:n_null] = gamma[p:]
    return SubFit(group=int(group), beta_hat=gamma[:p].copy(), dual_coeffs=alpha,
                  null_coeffs=gamma[p:].copy(), anchors=z.copy(), lam=float(lam),
                  trace_hat=float(tr_h), sigma2_hat=sigma2, kernel=kernel, coef_modes=coef)


class OracleFit:
    """Pooled fit of f with every group's linear coefficients known."""

    def __init__(self, sub: SubFit):
        self.fit = sub

    def __call__(self, z) -> np.ndarray:
        return self.fit.f_hat(z)


def oracle_fit(data: PLDataset, kernel: EigenKernel, lam: float,
               true_betas: dict[int, np.ndarray]) -> OracleFit:
    missing = [int(j) for j in data.groups if int(j) not in true_betas]
    if missing:
        raise KeyError(f"true betas missing for groups {missing}")
    offset = np.empty(data.N)
    for j in data.groups:
        mask = data.group == j
        offset[mask] = data.x[mask] @ np.asarray(true_betas[int(j)], dtype=float)
    pooled = PLDataset(data.y - offset, np.zeros((data.N, 0)), data.z,
                       np.ones(data.N, dtype=np.int64))
    return OracleFit(fit_subpopulation(pooled, kernel, lam, group=0))


@dataclass
class AggregateModel:
    sub_fits: list[SubFit]
    weights: np.ndarray
    weighting: str
    coef_modes: np.ndarray
    sigma2_bar: float
    beta_check: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def kernel(self) -> EigenKernel:
        return self.sub_fits[0].kernel

    @property
    def lam(self) -> float:
        return self.sub_fits[0].lam

    @property
    def groups(self) -> list[int]:
        return [f.group for f in self.sub_fits]

    @property
    def beta_hat(self) -> dict[int, np.ndarray]:
        return {f.group: f.beta_hat for f in self.sub_fits}

    @property
    def sizes(self) -> dict[int, int]:
        return {f.group: f.n for f in self.sub_fits}

    def sub_fit(self, group: int) -> SubFit:
        for f in self.sub_fits:
            if f.group == group:
                return f
        raise KeyError(f"unknown group {group}")

    def f_bar(self, z) -> np.ndarray:
        return es.features(self.kernel, z, len(self.coef_modes)) @ self.coef_modes

    def beta_bar(self) -> np.ndarray:
        """Average of the per-group beta_hat (divide-and-conquer estimate)."""
        return np.tensordot(self.weights, np.vstack([f.beta_hat for f in self.sub_fits]), axes=1)


def aggregate(sub_fits: list[SubFit], weighting: str = "equal") -> AggregateModel:
    """Average the nonparametric parts; pool the variance estimates."""
    if not sub_fits:
        raise ValueError("no sub-fits to aggregate")
    fits = sorted(sub_fits, key=lambda f: f.group)
    lams = {f.lam for f in fits}
    if len(lams) > 1:
        raise ValueError(f"sub-fits use different lambdas: {sorted(lams)}")
    if len({f.kernel for f in fits}) > 1:
        raise ValueError("sub-fits use different kernels")
    if weighting == "equal":
        w = np.full(len(fits), 1.0 / len(fits))
    elif weighting == "by_size":
        sizes = np.array([f.n for f in fits], dtype=float)
        w = sizes / sizes.sum()
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    m = max(len(f.coef_modes) for f in fits)
    coef = np.zeros(m)
    for wj, f in zip(w, fits):
        coef[: len(f.coef_modes)] += wj * f.coef_modes
    s2 = np.array([f.sigma2_hat for f in fits])
    ok = np.isfinite(s2)
    if not ok.all():
        warnings.warn(f"{(~ok).sum()} group(s) excluded from pooled variance", RuntimeWarning,
                      stacklevel=2)
    sigma2_bar = float(s2[ok].mean()) if ok.any() else float("nan")
    return AggregateModel(fits, w, weighting, coef, sigma2_bar)


def boost_beta(data_j: PLDataset, f_bar) -> np.ndarray:
    """Least-squares refit of beta against the aggregated f."""
    x = data_j.x
    r = data_j.y - np.asarray(f_bar(data_j.z))
    xtx = x.T @ x
    if np.linalg.matrix_rank(xtx) < x.shape[1]:
        raise RankDeficientError("X'X is singular")
    return linalg.solve(xtx, x.T @ r, assume_a="pos")


def boost(model: AggregateModel, data: PLDataset) -> AggregateModel:
    model.beta_check = {j: boost_beta(data.subset(j), model.f_bar) for j in model.groups}
    return model


def fit_heterogeneous(data: PLDataset, kernel: EigenKernel, lam: float,
                      weighting: str = "equal", workers: int | None = None,
                      boosted: bool = True) -> AggregateModel:
    """Per-group fits, aggregation in ascending group order, then boosting."""
    data.validate(kernel)
    groups = [int(j) for j in data.groups]

    def one(j):
        return fit_subpopulation(data.subset(j), kernel, lam, group=j)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            fits = list(ex.map(one, groups))
    else:
        fits = [one(j) for j in groups]
    model = aggregate(fits, weighting)
    return boost(model, data) if boosted else model


def predict(model: AggregateModel, group: int, x0, z0, boosted: bool = False) -> float:
    beta = model.beta_check[group] if boosted else model.sub_fit(group).beta_hat
    return float(np.dot(np.asarray(x0, dtype=float), beta) + model.f_bar(np.asarray([z0]))[0])
