"""Heterogeneity tests on the linear coefficients.

Pairwise Wald tests compare two groups using either the raw per-group
estimates (variance Omega^{-1}) or the boosted ones (variance Sigma^{-1}).
The simultaneous test takes the max over many groups and calibrates it with
a Gaussian multiplier bootstrap that holds the design fixed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg, stats

from .asymptotics import AsymptoticQuantities
from .plkrr import AggregateModel, PLDataset, RankDeficientError


class Estimator(str, Enum):
    RAW = "raw"
    BOOSTED = "boosted"


@dataclass(frozen=True)
class PairwiseTestSpec:
    groups: tuple[int, int]
    contrast: np.ndarray | None = None
    alpha: float = 0.05
    estimator: Estimator = Estimator.RAW

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if len(self.groups) != 2 or self.groups[0] == self.groups[1]:
            raise ValueError("need two distinct groups")
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if self.contrast is not None:
            q = np.atleast_2d(np.asarray(self.contrast, dtype=float))
            if np.linalg.matrix_rank(q) < q.shape[0]:
                raise ValueError("contrast must have full row rank")
            object.__setattr__(self, "contrast", q)

    def contrast_for(self, p: int) -> np.ndarray:
        q = np.eye(p) if self.contrast is None else self.contrast
        if q.shape[1] != p or q.shape[0] > p:
            raise ValueError(f"contrast shape {q.shape} incompatible with p={p}")
        return q


@dataclass(frozen=True)
class SimulTestSpec:
    groups: tuple[int, ...]
    null_betas: dict[int, np.ndarray] | None = None
    adjacent_diff: bool = False
    alpha: float = 0.05
    bootstrap_reps: int = 500
    two_sided: bool = False

    def __post_init__(self):
        if len(self.groups) < 1:
            raise ValueError("group set is empty")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.bootstrap_reps < 100:
            raise ValueError("bootstrap_reps must be at least 100")
        if self.bootstrap_reps < 2.0 / self.alpha:
            raise ValueError(f"B={self.bootstrap_reps} too small for alpha={self.alpha}; need B >= 2/alpha")
        if self.adjacent_diff and len(self.groups) < 2:
            raise ValueError("adjacent-difference mode needs at least two groups")
        if not self.adjacent_diff and self.null_betas is None:
            raise ValueError("null_betas required unless adjacent_diff is set")
        object.__setattr__(self, "groups", tuple(sorted(int(g) for g in self.groups)))

    @property
    def d(self) -> int:
        return len(self.groups)


@dataclass
class TestReport:
    statistic: float
    critical_value: float
    reject: bool
    rule: str
    contributions: np.ndarray
    draws: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"rule": self.rule, "statistic": self.statistic,
               "critical_value": self.critical_value, "reject": self.reject}
        out.update(self.details)
        return out

    def write_draws(self, path) -> None:
        if self.draws is None:
            raise ValueError("report carries no bootstrap draws")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["b", "draw"])
            for b, v in enumerate(self.draws):
                w.writerow([b, f"{v:.17g}"])


def _harmonic(n_j: int, n_k: int) -> float:
    return 2.0 / (1.0 / n_j + 1.0 / n_k)


def _moment(quantities: AsymptoticQuantities, estimator: Estimator) -> np.ndarray:
    return quantities.omega if estimator is Estimator.RAW else quantities.sigma_xx


def wald_pairwise(model: AggregateModel, spec: PairwiseTestSpec,
                  quantities: AsymptoticQuantities, sigma2: float | None = None) -> TestReport:
    """Chi-square Wald test of Q(beta_j - beta_k) = 0."""
    j, k = spec.groups
    if spec.estimator is Estimator.RAW:
        bj, bk = model.sub_fit(j).beta_hat, model.sub_fit(k).beta_hat
    else:
        if not model.beta_check:
            raise ValueError("model has no boosted estimates")
        bj, bk = model.beta_check[j], model.beta_check[k]
    n_j, n_k = model.sub_fit(j).n, model.sub_fit(k).n
    n = float(n_j) if n_j == n_k else _harmonic(n_j, n_k)
    s2 = model.sigma2_bar if sigma2 is None else sigma2
    if not np.isfinite(s2) or s2 <= 0:
        raise ValueError(f"invalid sigma^2 {s2}")
    q = spec.contrast_for(len(bj))
    m = _moment(quantities, spec.estimator)
    try:
        m_inv = linalg.inv(m)
        v = 2.0 * s2 * q @ m_inv @ q.T
        t = math.sqrt(n) * q @ (bj - bk)
        quad = float(t @ linalg.solve(v, t, assume_a="pos"))
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular variance in Wald test") from exc
    crit = float(stats.chi2.ppf(1.0 - spec.alpha, q.shape[0]))
    # q = 1: the same rule as |diff| > sqrt(2) sigma [M^-1]^{1/2} z_{alpha/2} / sqrt(n)
    details = {"n": n, "q": q.shape[0], "sigma2": s2, "harmonic_n": n_j != n_k}
    if q.shape[0] == 1:
        half = math.sqrt(v[0, 0] / n) * stats.norm.ppf(1.0 - spec.alpha / 2.0)
        details["acceptance_half_width"] = half
    name = "psi1" if spec.estimator is Estimator.RAW else "psi2"
    return TestReport(quad, crit, quad > crit, f"{name}:chi2_ellipsoid", t, details=details)


def acceptance_half_width(quantities: AsymptoticQuantities, estimator: Estimator | str,
                          sigma2: float, n: int, alpha: float = 0.05) -> float:
    """Half-width of the q = 1 acceptance interval for beta_1 differences."""
    m = _moment(quantities, Estimator(estimator))
    return math.sqrt(2.0 * sigma2 * linalg.inv(m)[0, 0] / n) * stats.norm.ppf(1.0 - alpha / 2.0)


def power_curve(spec: PairwiseTestSpec, quantities: AsymptoticQuantities, n: int,
                delta_grid, sigma2: float = 1.0) -> list[tuple[float, float]]:
    """Analytic power of the scalar two-sided test."""
    p = quantities.omega.shape[0]
    q = spec.contrast_for(p)
    if q.shape[0] != 1:
        raise ValueError("power_curve supports a single contrast row only")
    m_inv = linalg.inv(_moment(quantities, spec.estimator))
    sig_star = math.sqrt(2.0 * sigma2 * float((q @ m_inv @ q.T)[0, 0]))
    z = stats.norm.ppf(1.0 - spec.alpha / 2.0)
    out = []
    for delta in delta_grid:
        c = delta * math.sqrt(n) / sig_star
        out.append((float(delta), float(1.0 - (stats.norm.cdf(-c + z) - stats.norm.cdf(-c - z)))))
    return out


def _loadings(data: PLDataset, groups) -> dict[int, np.ndarray]:
    """Per-group rows of X Sigma_hat^{-1}, shape (n_j, p)."""
    out = {}
    for j in groups:
        x = data.subset(j).x
        s_hat = x.T @ x / len(x)
        if np.linalg.matrix_rank(s_hat) < x.shape[1]:
            raise RankDeficientError(f"group {j}: Sigma_hat is singular")
        out[j] = linalg.solve(s_hat, x.T, assume_a="pos").T
    return out


def _draw(b: int, seed: int, groups, loads, sizes, sigma: float, adjacent: bool,
          two_sided: bool) -> float:
    rng = np.random.default_rng([seed, b])
    vecs = {}
    for j in groups:
        e = rng.standard_normal(sizes[j]) * sigma
        vecs[j] = loads[j].T @ e / sizes[j]
    return _max_stat(groups, vecs, sizes, adjacent, two_sided)[0]


def _max_stat(groups, est: dict, sizes: dict, adjacent: bool, two_sided: bool):
    rows = []
    if adjacent:
        for a, b in zip(groups[:-1], groups[1:]):
            rows.append(math.sqrt(_harmonic(sizes[a], sizes[b])) * (est[a] - est[b]))
    else:
        for j in groups:
            rows.append(math.sqrt(sizes[j]) * est[j])
    contrib = np.vstack(rows)
    vals = np.abs(contrib) if two_sided else contrib
    return float(vals.max()), contrib


def bootstrap_quantile(draws: np.ndarray, alpha: float) -> float:
    """Order statistic ceil((1 - alpha) B) of the draws."""
    srt = np.sort(np.asarray(draws, dtype=float))
    k = math.ceil((1.0 - alpha) * len(srt) - 1e-12)
    return float(srt[max(k, 1) - 1])


def bootstrap_simultaneous(model: AggregateModel, data: PLDataset, spec: SimulTestSpec,
                           sigma2: float | None = None, seed: int = 0) -> TestReport:
    """Max-type test of beta_j = null_j over a group set with multiplier-bootstrap calibration.

    Draw b uses its own generator seeded by (seed, b), so the quantile does not
    depend on evaluation order.
    """
    if not model.beta_check:
        raise ValueError("model has no boosted estimates")
    groups = spec.groups
    unknown = [j for j in groups if j not in model.beta_check]
    if unknown:
        raise KeyError(f"unknown groups {unknown}")
    s2 = model.sigma2_bar if sigma2 is None else sigma2
    if not np.isfinite(s2) or s2 <= 0:
        raise ValueError(f"invalid sigma^2 {s2}")
    sizes = {j: model.sub_fit(j).n for j in groups}
    if spec.adjacent_diff:
        est = {j: model.beta_check[j] for j in groups}
    else:
        missing = [j for j in groups if j not in spec.null_betas]
        if missing:
            raise KeyError(f"null values missing for groups {missing}")
        est = {j: model.beta_check[j] - np.asarray(spec.null_betas[j], dtype=float) for j in groups}
    stat, contrib = _max_stat(groups, est, sizes, spec.adjacent_diff, spec.two_sided)
    loads = _loadings(data, groups)
    sigma = math.sqrt(s2)
    draws = np.array([_draw(b, seed, groups, loads, sizes, sigma, spec.adjacent_diff,
                            spec.two_sided) for b in range(spec.bootstrap_reps)])
    crit = bootstrap_quantile(draws, spec.alpha)
    rule = ("adjacent_diff:" if spec.adjacent_diff else "") + (
        "two_sided_max_abs" if spec.two_sided else "one_sided_max")
    details = {"d": spec.d, "B": spec.bootstrap_reps, "sigma2": s2, "seed": seed}
    return TestReport(stat, crit, stat > crit, rule, contrib, draws, details)


def scalar_oracle_quantile(x: np.ndarray, sigma2: float, alpha: float = 0.05) -> float:
    """Exact conditional (1 - alpha) quantile of W for one group and p = 1."""
    x = np.asarray(x, dtype=float).reshape(-1)
    s_hat = float(np.mean(x * x))
    return float(stats.norm.ppf(1.0 - alpha) * math.sqrt(sigma2 / s_hat))
