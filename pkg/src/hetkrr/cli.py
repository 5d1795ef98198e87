"""Command-line entry point: ``hetkrr {fit,simulate,test-pair,test-simul,diagnose}``.

Settings resolve as command-line flag, then config file (INI, any section),
then built-in default.  The default output directory can be set with the
``HETKRR_OUTPUT_DIR`` environment variable.  Every file written starts with a
``#`` header carrying the package version, seed and a hash of the resolved
configuration, and all floats are written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import eigensystems as es
from . import heterotest as ht
from . import simharness as sh
from .eigensystems import EigenKernel, Family
from .plkrr import DegreesOfFreedomError, PLDataset, RankDeficientError, fit_heterogeneous

OUTPUT_ENV = "HETKRR_OUTPUT_DIR"
FBAR_GRID = 512


class DataFormatError(ValueError):
    pass


ERROR_CODES = [
    (DataFormatError, "E_DATA", 2),
    (RankDeficientError, "E_RANK_DEFICIENT", 3),
    (DegreesOfFreedomError, "E_DOF", 4),
    (es.DomainError, "E_DOMAIN", 5),
    (es.TruncationError, "E_TRUNCATION", 6),
    (np.linalg.LinAlgError, "E_LINALG", 7),
    (KeyError, "E_KEY", 8),
    (OSError, "E_IO", 9),
    (ValueError, "E_VALUE", 10),
]


@dataclass
class RunConfig:
    command: str = ""
    data: str | None = None
    kernel: str = "sobolev_periodic"
    nu: float = 2.0
    decay_p: float = 1.0
    rank: int = 3
    dictionary: str = "polynomial"
    truncation: int = es.DEFAULT_TRUNCATION
    z_min: float | None = None
    z_max: float | None = None
    lam: str = "joint_clt"
    lambda_scale: float = 1.0
    weighting: str = "equal"
    seed: int = 0
    B: int = 500
    alpha: float = 0.05
    out: str | None = None
    workers: int = 1
    # test-pair / test-simul
    groups: str = "all"
    contrast: str | None = None
    estimator: str = "raw"
    null: str = "zero-diff"
    two_sided: bool = False
    sigma2: float | None = None
    # simulate
    experiment: str = "coverage"
    N: str = "1024"
    s: str = "1,2,4,8,16,32,64,128"
    reps: int = 200
    sim_lambda_scale: float | None = None
    # diagnose
    z0: float = 0.5

    def resolved_out(self) -> str:
        return self.out or os.environ.get(OUTPUT_ENV) or "hetkrr_out"

    def to_ini(self) -> str:
        lines = ["[run]"]
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        body = self.to_ini()
        # the output location does not change results
        body = "\n".join(ln for ln in body.splitlines() if not ln.startswith("out ="))
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def header(self) -> str:
        return f"hetkrr {__version__} command={self.command} seed={self.seed} config_sha256={self.digest()}"


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_KEYS = {name.lower(): name for name in _TYPES}


def _coerce(name: str, raw):
    t = _TYPES[name]
    if raw is None or not isinstance(raw, str):
        return raw
    if "bool" in t:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def load_config_file(path: str) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    out = {}
    for sec in cp.sections():
        for raw, val in cp.items(sec):
            key = _KEYS.get(raw.replace("-", "_").lower())
            if key is None:
                raise ValueError(f"unknown config key {raw!r} in section [{sec}]")
            out[key] = _coerce(key, val)
    return out


def resolve(command: str, cli: dict, config_path: str | None) -> RunConfig:
    """Flag > config file > default."""
    values = {}
    if config_path:
        values.update(load_config_file(config_path))
    values.update({k: v for k, v in cli.items() if v is not None and k in _TYPES})
    values["command"] = command
    return RunConfig(**values)


# data ------------------------------------------------------------------------------------------

def ingest_csv(path: str, kernel: EigenKernel | None = None) -> PLDataset:
    """Read ``group,y,z,x1..xp``; errors name the offending line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        head = [h.strip() for h in head]
        p = len(head) - 3
        expected = ["group", "y", "z"] + [f"x{k}" for k in range(1, p + 1)]
        if p < 1 or head != expected:
            raise DataFormatError(f"{path}:1: header must be group,y,z,x1,...,xp; got {','.join(head)}")
        g, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != p + 3:
                raise DataFormatError(f"{path}:{line_no}: expected {p + 3} fields, got {len(row)}")
            try:
                gid = int(row[0])
                vals = [float(c) for c in row[1:]]
            except ValueError:
                raise DataFormatError(f"{path}:{line_no}: non-numeric field") from None
            if gid < 1:
                raise DataFormatError(f"{path}:{line_no}: group id must be a positive integer, got {gid}")
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError(f"{path}:{line_no}: non-finite value")
            if kernel is not None and kernel.domain is not None:
                lo, hi = kernel.domain
                if not lo <= vals[1] <= hi:
                    raise DataFormatError(f"{path}:{line_no}: z={vals[1]!r} outside [{lo}, {hi}]")
            g.append(gid)
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    arr = np.asarray(rows)
    return PLDataset(arr[:, 0], arr[:, 2:], arr[:, 1], np.asarray(g, dtype=np.int64))


def write_dataset(data: PLDataset, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "y", "z"] + [f"x{k}" for k in range(1, data.p + 1)])
        for i in range(data.N):
            w.writerow([int(data.group[i]), sh.fmt(data.y[i]), sh.fmt(data.z[i])]
                       + [sh.fmt(v) for v in data.x[i]])


def _read_matrix(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if line_no == 1:
                    continue
                raise DataFormatError(f"{path}:{line_no}: non-numeric field") from None
    if not rows:
        raise DataFormatError(f"{path}: no numeric rows")
    return np.asarray(rows)


# helpers ---------------------------------------------------------------------------------------

def build_kernel(cfg: RunConfig) -> EigenKernel:
    fam = Family(cfg.kernel)
    domain = None
    if cfg.z_min is not None or cfg.z_max is not None:
        if cfg.z_min is None or cfg.z_max is None:
            raise ValueError("set both z_min and z_max")
        domain = (cfg.z_min, cfg.z_max)
    if fam is Family.SOBOLEV_PERIODIC:
        return EigenKernel.sobolev(cfg.nu, domain or (0.0, 1.0), cfg.truncation)
    if fam is Family.GAUSSIAN_EXP:
        return EigenKernel.gaussian(cfg.decay_p, domain, cfg.truncation)
    return EigenKernel.finite_rank(cfg.rank, cfg.dictionary, domain=domain)


def resolve_lambda(cfg: RunConfig, kernel: EigenKernel, N: int) -> float:
    try:
        lam = float(cfg.lam)
    except ValueError:
        lam = asy.lambda_rule(kernel, N, asy.Objective(cfg.lam), cfg.lambda_scale)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return lam


def _kv_block(pairs) -> str:
    return "".join(f"{k} = {sh.fmt(v)}\n" for k, v in pairs)


def _write_text(path: str, header: str, body: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        fh.write(body)


def _prepare(cfg: RunConfig) -> str:
    out = cfg.resolved_out()
    os.makedirs(out, exist_ok=True)
    _write_text(os.path.join(out, f"{cfg.command}_config.ini"), cfg.header(), cfg.to_ini())
    return out


def _group_list(spec: str, available) -> list[int]:
    if spec.strip() == "all":
        return [int(g) for g in available]
    return [int(t) for t in spec.replace(";", ",").split(",") if t.strip()]


def _int_list(spec: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(spec).split(",") if t.strip())


def _fit(cfg: RunConfig):
    kernel = build_kernel(cfg)
    if not cfg.data:
        raise ValueError("--data is required")
    data = ingest_csv(cfg.data, kernel)
    lam = resolve_lambda(cfg, kernel, data.N)
    model = fit_heterogeneous(data, kernel, lam, cfg.weighting, cfg.workers)
    return kernel, data, lam, model


# commands --------------------------------------------------------------------------------------

def cmd_fit(cfg: RunConfig) -> None:
    kernel, data, lam, model = _fit(cfg)
    out = _prepare(cfg)
    hdr = cfg.header()
    p = data.p
    rows = []
    for f in model.sub_fits:
        r = {"group": f.group, "n": f.n, "sigma2_hat": f.sigma2_hat, "trace_hat": f.trace_hat}
        for k in range(p):
            r[f"beta_hat_{k + 1}"] = f.beta_hat[k]
            r[f"beta_check_{k + 1}"] = model.beta_check[f.group][k]
        rows.append(r)
    cols = (["group", "n"] + [f"beta_hat_{k + 1}" for k in range(p)]
            + [f"beta_check_{k + 1}" for k in range(p)] + ["sigma2_hat", "trace_hat"])
    sh.write_csv(os.path.join(out, "fit_groups.csv"), cols, rows, hdr)

    lo, hi = kernel.domain if kernel.domain is not None else (float(data.z.min()), float(data.z.max()))
    grid = np.linspace(lo, hi, FBAR_GRID)
    sh.write_csv(os.path.join(out, "fit_fbar.csv"), ("z", "f_bar"),
                 [{"z": a, "f_bar": b} for a, b in zip(grid, model.f_bar(grid))], hdr)

    dual = []
    for wj, f in zip(model.weights, model.sub_fits):
        for a, c in zip(f.anchors, f.dual_coeffs):
            dual.append({"group": f.group, "weight": wj, "kind": "anchor", "z": a, "coef": c})
        for i, c in enumerate(f.null_coeffs):
            dual.append({"group": f.group, "weight": wj, "kind": f"null{i}", "z": float("nan"),
                         "coef": c})
    sh.write_csv(os.path.join(out, "fit_dual.csv"), ("group", "weight", "kind", "z", "coef"),
                 dual, hdr)

    summary = _kv_block([("kernel", kernel.describe()), ("N", data.N), ("s", data.s), ("p", p),
                         ("lambda", lam), ("d_lambda", es.effective_dimension(kernel, lam)),
                         ("sigma2_bar", model.sigma2_bar), ("weighting", model.weighting)])
    _write_text(os.path.join(out, "fit_summary.txt"), hdr, summary)
    sys.stdout.write(summary)


def cmd_simulate(cfg: RunConfig) -> None:
    if cfg.experiment not in sh.EXPERIMENTS:
        raise ValueError(f"unknown experiment {cfg.experiment!r}; choose from {sorted(sh.EXPERIMENTS)}")
    ecfg = sh.ExperimentConfig(Ns=_int_list(cfg.N), ss=_int_list(cfg.s), R=cfg.reps, seed=cfg.seed,
                               nu=cfg.nu, alpha=cfg.alpha, lambda_scale=cfg.sim_lambda_scale,
                               workers=cfg.workers)
    if not ecfg.cells():
        raise ValueError("no valid (N, s) cells")
    if cfg.experiment == "simul":
        res = sh.experiment_simultaneous_size(ecfg, B=cfg.B, two_sided=cfg.two_sided)
    else:
        res = sh.EXPERIMENTS[cfg.experiment](ecfg)
    out = _prepare(cfg)
    for path in res.write(out, cfg.header()):
        sys.stdout.write(f"wrote {path}\n")


def cmd_test_pair(cfg: RunConfig) -> None:
    kernel, data, lam, model = _fit(cfg)
    groups = _group_list(cfg.groups, data.groups)
    if len(groups) != 2:
        raise ValueError("--groups must name exactly two groups, e.g. 1,2")
    q = _read_matrix(cfg.contrast) if cfg.contrast else None
    spec = ht.PairwiseTestSpec(tuple(groups), q, cfg.alpha, ht.Estimator(cfg.estimator))
    quant = asy.plugin_quantities(data.x, data.z, kernel, lam)
    rep = ht.wald_pairwise(model, spec, quant, cfg.sigma2)
    out = _prepare(cfg)
    body = _kv_block(list(rep.as_dict().items()) + [("lambda", lam)]
                     + [(f"t_{i + 1}", v) for i, v in enumerate(np.ravel(rep.contributions))])
    _write_text(os.path.join(out, "test_pair.txt"), cfg.header(), body)
    sys.stdout.write(body)


def cmd_test_simul(cfg: RunConfig) -> None:
    kernel, data, lam, model = _fit(cfg)
    groups = _group_list(cfg.groups, data.groups)
    if cfg.null == "zero-diff":
        spec = ht.SimulTestSpec(tuple(groups), None, True, cfg.alpha, cfg.B, cfg.two_sided)
    else:
        mat = _read_matrix(cfg.null)
        if mat.shape[1] != data.p + 1:
            raise DataFormatError(f"{cfg.null}: expected columns group,b1..b{data.p}")
        nulls = {int(r[0]): r[1:] for r in mat}
        spec = ht.SimulTestSpec(tuple(groups), nulls, False, cfg.alpha, cfg.B, cfg.two_sided)
    rep = ht.bootstrap_simultaneous(model, data, spec, cfg.sigma2, cfg.seed)
    out = _prepare(cfg)
    body = _kv_block(list(rep.as_dict().items()) + [("lambda", lam)])
    _write_text(os.path.join(out, "test_simul.txt"), cfg.header(), body)
    path = os.path.join(out, "test_simul_draws.csv")
    sh.write_csv(path, ("b", "draw"), [{"b": b, "draw": v} for b, v in enumerate(rep.draws)],
                 cfg.header())
    sys.stdout.write(body)


def cmd_diagnose(cfg: RunConfig) -> None:
    kernel = build_kernel(cfg)
    N = _int_list(cfg.N)[0]
    lam = resolve_lambda(cfg, kernel, N)
    bounds = asy.s_bounds(kernel, N, lam)
    pairs = [("kernel", kernel.describe()), ("N", N), ("lambda", lam),
             ("lambda_minimax_mse", asy.lambda_rule(kernel, N, asy.Objective.MINIMAX_MSE)),
             ("lambda_joint_clt", asy.lambda_rule(kernel, N, asy.Objective.JOINT_CLT)),
             ("d_lambda", es.effective_dimension(kernel, lam)),
             ("n_modes", es.n_modes(kernel, lam)),
             ("z0", cfg.z0), ("sigma2_z0_series", asy.pointwise_variance(kernel, lam, cfg.z0))]
    if kernel.family is Family.SOBOLEV_PERIODIC:
        pairs.append(("sigma2_z0_limit", asy.sobolev_sigma2_limit(kernel.order_nu)))
    pairs += [("s_upper", bounds.upper), ("s_upper_formula", bounds.upper_formula),
              ("s_lower", bounds.lower), ("s_lower_formula", bounds.lower_formula),
              ("s_bounds_guidance_only", bounds.guidance_only)]
    body = _kv_block(pairs)
    out = _prepare(cfg)
    _write_text(os.path.join(out, "diagnose.txt"), cfg.header(), body)
    sys.stdout.write(body)


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "test-pair": cmd_test_pair,
            "test-simul": cmd_test_simul, "diagnose": cmd_diagnose}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetkrr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hetkrr {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        S = argparse.SUPPRESS
        p.add_argument("--config", default=None, help="INI file with key = value settings")
        p.add_argument("--out", default=S, help=f"output directory (env {OUTPUT_ENV})")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--workers", type=int, default=S)
        p.add_argument("--kernel", default=S, choices=[f.value for f in Family])
        p.add_argument("--nu", type=float, default=S)
        p.add_argument("--decay-p", dest="decay_p", type=float, default=S)
        p.add_argument("--rank", type=int, default=S)
        p.add_argument("--dictionary", default=S, choices=["polynomial", "linear"])
        p.add_argument("--truncation", type=int, default=S)
        p.add_argument("--z-min", dest="z_min", type=float, default=S)
        p.add_argument("--z-max", dest="z_max", type=float, default=S)
        p.add_argument("--lambda", dest="lam", default=S,
                       help="positive value or rule name (minimax_mse, joint_clt)")
        p.add_argument("--lambda-scale", dest="lambda_scale", type=float, default=S)
        p.add_argument("--alpha", type=float, default=S)
        return p

    S = argparse.SUPPRESS
    fit = common(sub.add_parser("fit", help="fit per-group models and aggregate"))
    fit.add_argument("--data", default=S)
    fit.add_argument("--weighting", default=S, choices=["equal", "by_size"])

    sim = common(sub.add_parser("simulate", help="run a Monte Carlo experiment"))
    sim.add_argument("--experiment", default=S, choices=sorted(sh.EXPERIMENTS))
    sim.add_argument("--N", default=S, help="comma-separated sample sizes")
    sim.add_argument("--s", default=S, help="comma-separated group counts")
    sim.add_argument("--reps", type=int, default=S)
    sim.add_argument("--B", type=int, default=S)
    sim.add_argument("--two-sided", dest="two_sided", action="store_true", default=S)
    sim.add_argument("--sim-lambda-scale", dest="sim_lambda_scale", type=float, default=S,
                     help="rate constant for the experiments (default: calibrated values)")

    tp = common(sub.add_parser("test-pair", help="pairwise Wald heterogeneity test"))
    tp.add_argument("--data", default=S)
    tp.add_argument("--groups", default=S, help="j,k")
    tp.add_argument("--contrast", default=S, help="CSV with one contrast row per line")
    tp.add_argument("--estimator", default=S, choices=["raw", "boosted"])
    tp.add_argument("--sigma2", type=float, default=S)
    tp.add_argument("--weighting", default=S, choices=["equal", "by_size"])

    ts = common(sub.add_parser("test-simul", help="simultaneous bootstrap test"))
    ts.add_argument("--data", default=S)
    ts.add_argument("--groups", default=S, help="comma list or 'all'")
    ts.add_argument("--null", default=S, help="CSV group,b1..bp or 'zero-diff'")
    ts.add_argument("--B", type=int, default=S)
    ts.add_argument("--two-sided", dest="two_sided", action="store_true", default=S)
    ts.add_argument("--sigma2", type=float, default=S)
    ts.add_argument("--weighting", default=S, choices=["equal", "by_size"])

    dg = common(sub.add_parser("diagnose", help="print asymptotic diagnostics"))
    dg.add_argument("--N", default=S)
    dg.add_argument("--z0", type=float, default=S)
    return ap


def error_code(exc: BaseException) -> tuple[str, int]:
    for cls, code, status in ERROR_CODES:
        if isinstance(exc, cls):
            return code, status
    return "E_INTERNAL", 1


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = resolve(command, args, config_path)
        COMMANDS[command](cfg)
    except Exception as exc:  # noqa: BLE001 - every failure maps to one error line
        code, status = error_code(exc)
        msg = str(exc).replace("\n", " ")
        sys.stderr.write(f"error code={code} type={type(exc).__name__} message={msg}\n")
        return status
    return 0


if __name__ == "__main__":
    sys.exit(main())
