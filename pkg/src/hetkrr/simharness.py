"""Data generation and Monte Carlo experiments for the heterogeneous model.

Design: Z, W ~ Uniform(-1, 1) independent, X = (W + Z) / 2, eps ~ N(0, sigma^2),
Y = X beta_j + f0(Z) + eps, with f0 a two-component Beta-density mixture read
on t = (z + 1) / 2.  E[X | Z] = Z / 2, so Omega = 1/12 and Sigma = 1/6.

Every replicate draws from ``default_rng([seed, N, r])``.  The draws of
(Z, W, eps) do not depend on s, beta or Delta, so cells that differ only in
those share common random numbers; results never depend on worker count.
"""

from __future__ import annotations

import csv
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import asymptotics as asy
from . import eigensystems as es
from .asymptotics import AsymptoticQuantities, Objective
from .eigensystems import EigenKernel, Family
from .heterotest import (Estimator, PairwiseTestSpec, SimulTestSpec, bootstrap_simultaneous,
                         wald_pairwise)
from .plkrr import PLDataset, fit_heterogeneous, oracle_fit

OMEGA = 1.0 / 12.0
SIGMA_XX = 1.0 / 6.0
B_SECOND_MOMENT = 1.0 / 12.0  # E[(Z/2)^2]
DOMAIN = (-1.0, 1.0)

# Rate constants multiplying lambda_rule in the experiments.  Chosen once by
# scripts/calibrate_lambda.py: the constant that makes the rule hit the
# oracle-MSE-optimal lambda at N = 1024 (pilot seeds disjoint from the defaults).
LAMBDA_SCALE = {Objective.JOINT_CLT: 1.224e-5, Objective.MINIMAX_MSE: 1.440e-4}

_QUAD_Z, _QUAD_W = np.polynomial.legendre.leggauss(512)
_QUAD_W = _QUAD_W / 2.0


def f0(z) -> np.ndarray:
    t = (np.asarray(z, dtype=float) + 1.0) / 2.0
    return 0.6 * stats.beta.pdf(t, 30, 17) + 0.4 * stats.beta.pdf(t, 3, 11)


@lru_cache(maxsize=None)
def f0_l2_norm() -> float:
    return float(math.sqrt(np.sum(_QUAD_W * f0(_QUAD_Z) ** 2)))


def sobolev_kernel(nu: float = 2.0) -> EigenKernel:
    return EigenKernel.sobolev(nu, DOMAIN)


@dataclass(frozen=True)
class DGPSpec:
    N: int
    s: int
    p: int = 1
    nu: float = 2.0
    sigma: float = 1.0
    beta_mode: str = "heterogeneous"
    delta: float = 0.0
    beta_common: float = 1.0
    by_size: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.p != 1:
            raise ValueError("the simulation design has p = 1")
        if self.s < 1 or self.N < self.s:
            raise ValueError("need 1 <= s <= N")
        if self.N % self.s and not self.by_size:
            raise ValueError(f"N={self.N} not divisible by s={self.s}; set by_size for unequal groups")
        if self.beta_mode not in ("heterogeneous", "homogeneous", "shift"):
            raise ValueError(f"unknown beta_mode {self.beta_mode!r}")

    def betas(self) -> dict[int, np.ndarray]:
        """heterogeneous: beta_j = j; homogeneous: common value; shift: common + Delta (j - 1)."""
        out = {}
        for j in range(1, self.s + 1):
            if self.beta_mode == "heterogeneous":
                b = float(j)
            elif self.beta_mode == "homogeneous":
                b = self.beta_common
            else:
                b = self.beta_common + self.delta * (j - 1)
            out[j] = np.array([b])
        return out


def group_labels(N: int, s: int) -> np.ndarray:
    sizes = [len(c) for c in np.array_split(np.arange(N), s)]
    return np.repeat(np.arange(1, s + 1), sizes)


def generate(dgp: DGPSpec, replicate: int = 0) -> PLDataset:
    rng = np.random.default_rng([dgp.seed, dgp.N, replicate])
    z = rng.uniform(-1.0, 1.0, dgp.N)
    w = rng.uniform(-1.0, 1.0, dgp.N)
    eps = rng.standard_normal(dgp.N) * dgp.sigma
    x = (w + z) / 2.0
    g = group_labels(dgp.N, dgp.s)
    betas = dgp.betas()
    beta_row = np.array([betas[j][0] for j in range(1, dgp.s + 1)])[g - 1]
    y = x * beta_row + f0(z) + eps
    return PLDataset(y, x[:, None], z, g)


def sample_moments(n_draws: int, seed: int = 0):
    """Monte Carlo (estimate, standard error) pairs for Omega and Sigma."""
    rng = np.random.default_rng([seed, n_draws])
    z = rng.uniform(-1.0, 1.0, n_draws)
    w = rng.uniform(-1.0, 1.0, n_draws)
    x = (w + z) / 2.0
    r2 = (x - z / 2.0) ** 2
    x2 = x * x
    se = lambda v: float(v.std(ddof=1) / math.sqrt(n_draws))  # noqa: E731
    return (float(r2.mean()), se(r2)), (float(x2.mean()), se(x2))


def _is_standard_sobolev(kernel: EigenKernel) -> bool:
    return kernel.family is Family.SOBOLEV_PERIODIC and tuple(kernel.domain) == DOMAIN


def dgp_b_coeffs(kernel: EigenKernel, m: int) -> np.ndarray:
    """<B, phi_l> for B(z) = z / 2 under Uniform(-1, 1), shape (1, m)."""
    if _is_standard_sobolev(kernel):
        # z / 2 = t - 1/2 on the unit circle: a sawtooth with sine coefficients only
        ell = es.modes(kernel, m)
        k = (ell + 1) // 2
        out = np.where((ell % 2 == 1), -math.sqrt(2.0) / (2.0 * math.pi * np.maximum(k, 1)), 0.0)
        return out[None, :]
    return project(lambda z: z / 2.0, kernel, m)[None, :]


def project(fn, kernel: EigenKernel, m: int, n_nodes: int = 2048) -> np.ndarray:
    """L2(Uniform(-1, 1)) inner products of ``fn`` with the first m eigenfunctions."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    return (fn(nodes) * weights / 2.0) @ es.features(kernel, nodes, m)


@lru_cache(maxsize=32)
def f0_coeffs(kernel: EigenKernel, m: int) -> np.ndarray:
    """Eigen-coefficients of f0 under Uniform(-1, 1)."""
    if _is_standard_sobolev(kernel):
        kmax = (m + 1) // 2
        big = 1 << max(16, int(math.ceil(math.log2(4 * kmax + 8))))
        t = np.arange(big) / big
        spec = np.fft.rfft(f0(2.0 * t - 1.0)) / big
        ell = es.modes(kernel, m)
        k = (ell + 1) // 2
        out = np.where(ell == 0, spec[0].real,
                       np.where(ell % 2 == 1, -math.sqrt(2.0) * spec[k].imag,
                                math.sqrt(2.0) * spec[k].real))
        return out.astype(float)
    return project(f0, kernel, m)


def analytic_quantities(kernel: EigenKernel, lam: float, z0: float | None = None,
                        m: int | None = None) -> AsymptoticQuantities:
    """Exact Omega, Sigma, B for the design; sigma^2_{z0} by the closed form for Sobolev."""
    if m is None:
        m = min(es.n_modes(kernel, lam), 1 << 16)
    q = AsymptoticQuantities(np.array([[OMEGA]]), np.array([[SIGMA_XX]]), dgp_b_coeffs(kernel, m),
                             b_second_moment=np.array([[B_SECOND_MOMENT]]))
    s2 = None
    if kernel.family is Family.SOBOLEV_PERIODIC:
        s2 = asy.sobolev_sigma2_limit(kernel.order_nu)
    return asy.complete(q, kernel, lam, z0, sigma2_z0=s2, f0_coeffs=f0_coeffs(kernel, m))


@dataclass(frozen=True)
class ExperimentConfig:
    Ns: tuple[int, ...] = (256, 512, 1024, 2048)
    ss: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64, 128)
    R: int = 200
    seed: int = 20240607
    nu: float = 2.0
    sigma: float = 1.0
    x0: float = 0.5
    z0s: tuple[float, ...] = (0.25, 0.5, 0.75, 0.95)
    alpha: float = 0.05
    deltas: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5)
    lambda_scale: float | None = None
    known_sigma: bool = False
    with_oracle: bool = True
    workers: int = 1

    def lam(self, N: int, objective: Objective) -> float:
        scale = LAMBDA_SCALE[objective] if self.lambda_scale is None else self.lambda_scale
        return asy.lambda_rule(sobolev_kernel(self.nu), N, objective, scale)

    def cells(self):
        return [(N, s) for N in self.Ns for s in self.ss if N % s == 0 and N // s >= 3]


@dataclass
class ExperimentResult:
    name: str
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    replicate_rows: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)

    SUMMARY_COLUMNS = ("N", "s", "metric", "value", "mc_se", "replicates")
    REPLICATE_COLUMNS = ("N", "s", "replicate", "metric", "value")

    def value(self, N: int, s: int, metric: str) -> float:
        for r in self.rows:
            if r["N"] == N and r["s"] == s and r["metric"] == metric:
                return r["value"]
        raise KeyError((N, s, metric))

    def mc_se(self, N: int, s: int, metric: str) -> float:
        for r in self.rows:
            if r["N"] == N and r["s"] == s and r["metric"] == metric:
                return r["mc_se"]
        raise KeyError((N, s, metric))

    def write(self, directory, header: str | None = None) -> list[str]:
        """``<name>_summary.csv`` and ``<name>_replicates.csv``; timings go to a third file."""
        os.makedirs(directory, exist_ok=True)
        paths = []
        for suffix, cols, rows in (("summary", self.SUMMARY_COLUMNS, self.rows),
                                   ("replicates", self.REPLICATE_COLUMNS, self.replicate_rows)):
            path = os.path.join(directory, f"{self.name}_{suffix}.csv")
            write_csv(path, cols, rows, header)
            paths.append(path)
        if self.timings:
            path = os.path.join(directory, f"{self.name}_timing.csv")
            write_csv(path, ("N", "s", "replicate", "seconds"), self.timings, header)
            paths.append(path)
        return paths


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, columns, rows, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def _summarize(values: np.ndarray) -> tuple[float, float]:
    v = values[np.isfinite(values)]
    if v.size == 0:
        return float("nan"), float("nan")
    mean = float(v.mean())
    if np.all((v == 0) | (v == 1)):
        return mean, math.sqrt(mean * (1 - mean) / v.size)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return mean, se


def _pooled_variance(m1: np.ndarray, m2: np.ndarray) -> tuple[float, float]:
    """Variance from per-replicate first and second moments, with a delta-method SE."""
    mu = float(m1.mean())
    var = float(m2.mean()) - mu * mu
    infl = m2 - 2.0 * mu * m1
    return var, float(infl.std(ddof=1) / math.sqrt(len(m1)))


def _run(fn, cfg: ExperimentConfig, units):
    if cfg.workers and cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            return list(ex.map(fn, [cfg] * len(units), units))
    return [fn(cfg, u) for u in units]


def _collect(name, cfg, units, outputs, derived=None) -> ExperimentResult:
    """outputs[i] maps s -> {metric: value} for unit (N, r)."""
    res = ExperimentResult(name, cfg)
    table: dict[tuple[int, int], dict[str, list]] = {}
    for (N, r), out in zip(units, outputs):
        for s, metrics in out.items():
            if s == "_timing":
                continue
            cell = table.setdefault((N, s), {})
            for k, v in metrics.items():
                cell.setdefault(k, []).append(v)
                res.replicate_rows.append({"N": N, "s": s, "replicate": r, "metric": k, "value": v})
        for s, secs in out.get("_timing", {}).items():
            res.timings.append({"N": N, "s": s, "replicate": r, "seconds": secs})
    for (N, s) in sorted(table):
        cell = {k: np.asarray(v, dtype=float) for k, v in table[(N, s)].items()}
        for k in sorted(cell):
            mean, se = _summarize(cell[k])
            res.rows.append({"N": N, "s": s, "metric": k, "value": mean, "mc_se": se,
                             "replicates": int(np.isfinite(cell[k]).sum())})
        if derived:
            for k, (val, se) in derived(cell).items():
                res.rows.append({"N": N, "s": s, "metric": k, "value": val, "mc_se": se,
                                 "replicates": len(next(iter(cell.values())))})
    return res


def _units(cfg: ExperimentConfig):
    Ns = sorted({N for N, _ in cfg.cells()})
    return [(N, r) for N in Ns for r in range(cfg.R)]


def _ss(cfg: ExperimentConfig, N: int):
    return [s for (n, s) in cfg.cells() if n == N]


@contextmanager
def _quiet():
    # n_j - Tr(H) < 1 warnings are expected in the oversplit cells
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


# coverage of the predictive interval -------------------------------------------------------------

def _coverage_unit(cfg: ExperimentConfig, unit):
    N, r = unit
    kernel = sobolev_kernel(cfg.nu)
    lam = cfg.lam(N, Objective.JOINT_CLT)
    s2_z0 = asy.sobolev_sigma2_limit(cfg.nu)
    smooth = s2_z0 / (N * lam ** (1.0 / (2.0 * cfg.nu)))
    z_crit = stats.norm.ppf(1.0 - cfg.alpha / 2.0)
    z0 = np.asarray(cfg.z0s, dtype=float)
    new_eps = np.random.default_rng([cfg.seed, N, r, 1]).standard_normal(len(z0)) * cfg.sigma
    out = {}
    with _quiet():
        for s in _ss(cfg, N):
            dgp = DGPSpec(N, s, nu=cfg.nu, sigma=cfg.sigma, seed=cfg.seed)
            data = generate(dgp, r)
            model = fit_heterogeneous(data, kernel, lam, boosted=False)
            n = model.sub_fit(1).n
            sig2 = cfg.sigma ** 2 if cfg.known_sigma else model.sigma2_bar
            half = z_crit * math.sqrt(sig2) * math.sqrt(cfg.x0 ** 2 / (OMEGA * n) + smooth + 1.0)
            y_hat = cfg.x0 * model.sub_fit(1).beta_hat[0] + model.f_bar(z0)
            y_new = cfg.x0 * dgp.betas()[1][0] + f0(z0) + new_eps
            m = {f"coverage_z0={zz:g}": float(abs(yh - yn) <= half)
                 for zz, yh, yn in zip(cfg.z0s, y_hat, y_new)}
            m["sigma2_bar"] = sig2
            m["half_width"] = half
            out[s] = m
    return out


def experiment_coverage(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    units = _units(cfg)
    return _collect("coverage", cfg, units, _run(_coverage_unit, cfg, units))


# MSE of the aggregated function ---------------------------------------------------------------

def _l2_error(fn) -> float:
    return float(np.sum(_QUAD_W * (fn(_QUAD_Z) - f0(_QUAD_Z)) ** 2))


def _mse_unit(cfg: ExperimentConfig, unit):
    N, r = unit
    kernel = sobolev_kernel(cfg.nu)
    lam = cfg.lam(N, Objective.MINIMAX_MSE)
    out = {}
    with _quiet():
        oracle = None
        for s in _ss(cfg, N):
            dgp = DGPSpec(N, s, nu=cfg.nu, sigma=cfg.sigma, seed=cfg.seed)
            data = generate(dgp, r)
            model = fit_heterogeneous(data, kernel, lam, boosted=False)
            m = {"mse": _l2_error(model.f_bar)}
            if cfg.with_oracle:
                if oracle is None:
                    # Y - X beta_0 is the same for every s under common random numbers
                    oracle = _l2_error(oracle_fit(data, kernel, lam, dgp.betas()))
                m["mse_oracle"] = oracle
            out[s] = m
    return out


def _mse_derived(cell):
    if "mse_oracle" not in cell:
        return {}
    ratio = cell["mse"].mean() / cell["mse_oracle"].mean()
    return {"mse_ratio_to_oracle": (float(ratio), float("nan"))}


def experiment_mse(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    units = _units(cfg)
    return _collect("mse", cfg, units, _run(_mse_unit, cfg, units), _mse_derived)


# confidence intervals for beta: raw versus boosted -------------------------------------------

def _ci_unit(cfg: ExperimentConfig, unit):
    N, r = unit
    kernel = sobolev_kernel(cfg.nu)
    lam = cfg.lam(N, Objective.JOINT_CLT)
    z_crit = stats.norm.ppf(1.0 - cfg.alpha / 2.0)
    out = {}
    with _quiet():
        for s in _ss(cfg, N):
            dgp = DGPSpec(N, s, nu=cfg.nu, sigma=cfg.sigma, seed=cfg.seed)
            data = generate(dgp, r)
            model = fit_heterogeneous(data, kernel, lam, boosted=True)
            sig = cfg.sigma if cfg.known_sigma else math.sqrt(model.sigma2_bar)
            betas = dgp.betas()
            zr, zc, c1, c2, l1, l2 = [], [], [], [], [], []
            for j in model.groups:
                n = model.sub_fit(j).n
                h1 = z_crit * sig / math.sqrt(OMEGA * n)
                h2 = z_crit * sig / math.sqrt(SIGMA_XX * n)
                e1 = model.sub_fit(j).beta_hat[0] - betas[j][0]
                e2 = model.beta_check[j][0] - betas[j][0]
                zr.append(math.sqrt(n) * e1)
                zc.append(math.sqrt(n) * e2)
                c1.append(abs(e1) <= h1)
                c2.append(abs(e2) <= h2)
                l1.append(2 * h1)
                l2.append(2 * h2)
            zr, zc = np.array(zr), np.array(zc)
            out[s] = {"ci1_coverage": float(np.mean(c1)), "ci2_coverage": float(np.mean(c2)),
                      "ci1_length": float(np.mean(l1)), "ci2_length": float(np.mean(l2)),
                      "z_raw_m1": float(zr.mean()), "z_raw_m2": float(np.mean(zr ** 2)),
                      "z_boost_m1": float(zc.mean()), "z_boost_m2": float(np.mean(zc ** 2))}
    return out


def _ci_derived(cell):
    out = {"var_raw": _pooled_variance(cell["z_raw_m1"], cell["z_raw_m2"]),
           "var_boosted": _pooled_variance(cell["z_boost_m1"], cell["z_boost_m2"])}
    out["length_ratio"] = (float(cell["ci2_length"].mean() / cell["ci1_length"].mean()),
                           float("nan"))
    return out


def experiment_ci_compare(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    units = _units(cfg)
    return _collect("ci", cfg, units, _run(_ci_unit, cfg, units), _ci_derived)


# pairwise heterogeneity tests -------------------------------------------------------------------

def _power_unit(cfg: ExperimentConfig, unit):
    N, r = unit
    kernel = sobolev_kernel(cfg.nu)
    lam = cfg.lam(N, Objective.JOINT_CLT)
    quant = AsymptoticQuantities(np.array([[OMEGA]]), np.array([[SIGMA_XX]]), np.zeros((1, 1)))
    out = {}
    with _quiet():
        for s in _ss(cfg, N):
            if s < 2:
                continue
            pairs = [(j, j + 1) for j in range(1, s, 2)]
            m = {}
            for delta in cfg.deltas:
                dgp = DGPSpec(N, s, nu=cfg.nu, sigma=cfg.sigma, beta_mode="shift", delta=delta,
                              seed=cfg.seed)
                model = fit_heterogeneous(generate(dgp, r), kernel, lam, boosted=True)
                sig2 = cfg.sigma ** 2 if cfg.known_sigma else None
                for est, tag in ((Estimator.RAW, "psi1"), (Estimator.BOOSTED, "psi2")):
                    rej = [wald_pairwise(model, PairwiseTestSpec(pr, alpha=cfg.alpha, estimator=est),
                                         quant, sig2).reject for pr in pairs]
                    m[f"reject_{tag}_delta={delta:g}"] = float(np.mean(rej))
            out[s] = m
    return out


def experiment_power(cfg: ExperimentConfig = ExperimentConfig(ss=(4,))) -> ExperimentResult:
    units = _units(cfg)
    return _collect("power", cfg, units, _run(_power_unit, cfg, units))


# homogeneous divide and conquer ---------------------------------------------------------------

def _dc_unit(cfg: ExperimentConfig, unit, record_timing: bool = False):
    N, r = unit
    kernel = sobolev_kernel(cfg.nu)
    lam = cfg.lam(N, Objective.JOINT_CLT)
    out, timing = {}, {}
    with _quiet():
        for s in _ss(cfg, N):
            dgp = DGPSpec(N, s, nu=cfg.nu, sigma=cfg.sigma, beta_mode="homogeneous", seed=cfg.seed)
            data = generate(dgp, r)
            t0 = time.perf_counter()
            model = fit_heterogeneous(data, kernel, lam, boosted=False)
            timing[s] = time.perf_counter() - t0
            zb = math.sqrt(N) * (model.beta_bar()[0] - dgp.beta_common)
            out[s] = {"z_bar_m1": zb, "z_bar_m2": zb * zb, "mse_f_bar": _l2_error(model.f_bar)}
    if record_timing:
        out["_timing"] = timing
    return out


def _dc_unit_timed(cfg, unit):
    return _dc_unit(cfg, unit, record_timing=True)


def _dc_derived(cell):
    return {"var_beta_bar": _pooled_variance(cell["z_bar_m1"], cell["z_bar_m2"])}


def experiment_homogeneous_dc(cfg: ExperimentConfig = ExperimentConfig(ss=(1, 2, 4, 8)),
                              record_timing: bool = False) -> ExperimentResult:
    """Wall-clock timings are kept apart from the deterministic CSVs."""
    units = _units(cfg)
    fn = _dc_unit_timed if record_timing else _dc_unit
    return _collect("dc", cfg, units, _run(fn, cfg, units), _dc_derived)


# simultaneous multiplier-bootstrap test ---------------------------------------------------------

def _simul_unit(cfg: ExperimentConfig, unit, B: int = 300, two_sided: bool = False):
    N, r = unit
    kernel = sobolev_kernel(cfg.nu)
    lam = cfg.lam(N, Objective.JOINT_CLT)
    out = {}
    with _quiet():
        for s in _ss(cfg, N):
            dgp = DGPSpec(N, s, nu=cfg.nu, sigma=cfg.sigma, seed=cfg.seed)
            data = generate(dgp, r)
            model = fit_heterogeneous(data, kernel, lam, boosted=True)
            spec = SimulTestSpec(tuple(model.groups), dgp.betas(), alpha=cfg.alpha,
                                 bootstrap_reps=B, two_sided=two_sided)
            sig2 = cfg.sigma ** 2 if cfg.known_sigma else None
            rep = bootstrap_simultaneous(model, data, spec, sig2, seed=hash_seed(cfg.seed, N, r))
            out[s] = {"reject": float(rep.reject), "statistic": rep.statistic,
                      "critical_value": rep.critical_value}
    return out


def hash_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from integers."""
    return int(np.random.SeedSequence(list(parts)).generate_state(2, np.uint32).view(np.uint64)[0]
               >> np.uint64(1))


@dataclass(frozen=True)
class _SimulCall:
    B: int
    two_sided: bool

    def __call__(self, cfg, unit):
        return _simul_unit(cfg, unit, self.B, self.two_sided)


def experiment_simultaneous_size(cfg: ExperimentConfig = ExperimentConfig(Ns=(2048,), ss=(16,),
                                                                          R=500),
                                 B: int = 300, two_sided: bool = False) -> ExperimentResult:
    """Rejection rate of the bootstrap max test with the null set to the truth."""
    units = _units(cfg)
    return _collect("simul", cfg, units, _run(_SimulCall(B, two_sided), cfg, units))


EXPERIMENTS = {
    "coverage": experiment_coverage,
    "mse": experiment_mse,
    "ci": experiment_ci_compare,
    "power": experiment_power,
    "dc": experiment_homogeneous_dc,
    "simul": experiment_simultaneous_size,
}


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
