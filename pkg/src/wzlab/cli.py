"""wz-lab: experiment configuration, dispatch, and machine-readable output.

Config files are flat ``key = value`` text (values in JSON syntax, ``#``
comments allowed); every experiment writes diff-able CSV plus a manifest
JSON.  Pass/fail gates live here, not in the library: library operations
return numbers, the runner encodes the thresholds, and the process exit
status reflects the gates.

Example::

    experiment = coupled-error
    model = linear1d
    a = -1.0
    eps = 0.1
    T = 20.0
    m = 64
    paths = 20000

Run with ``wz-lab coupled-error --config cfg.txt [--seed S] [--threads K]
[--out DIR]``.  The environment variable WZ_LAB_THREADS overrides the
default worker count (and nothing else).
"""

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._parallel import default_jobs
from .estimators import (coupled_error_experiment, driver_moment_experiment,
                         exact_linear_variance, lg_stable_bound,
                         lg_unstable_envelope, milstein_residual_experiment,
                         moments_uniform_experiment, orthogonality_bias_scale,
                         orthogonality_check, rate_experiment)
from .meshpaths import ConfigurationError, driver_gap_moments
from .models import builtin_models, get_model
from .spectral import CONDITIONS, certify, theorem_rate
from .wzint import (const_kernel, e_lambda, remainder_experiment, sin_kernel,
                    theorem4_envelope)

__all__ = ["ConfigError", "ExperimentConfig", "RunManifest", "parse_config", "run", "main"]

EXPERIMENTS = (
    "drivers-check", "spectral-cert", "linear-exact", "coupled-error", "rates",
    "milstein-residual", "orthogonality", "wz-integral", "moments-uniform",
)

# slope windows and tolerances applied by the runners
SLOPE_WINDOW_SQRT = (0.4, 0.6)
SLOPE_WINDOW_XBAR = (1.3, 1.7)
SLOPE_MIN_MEAN = 1.4
PLATEAU_REL = 0.25
MOMENT_GROWTH_REL = 0.05
SANDWICH_SLACK = 1e-10
SE_GATE = 4.0


class ConfigError(ConfigurationError):
    """Invalid experiment configuration; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config:\n  " + "\n  ".join(self.violations))


_DEFAULTS = {
    "model": "linear1d",
    "driver": "polygonal",
    "m": 64,
    "substeps": 1,
    "paths": 10000,
    "p_moments": [2],
    "seed": 0,
    "grid_n": 1001,
    "condition": "H_b",
    "kernel": "sin",
    "flow": "ito",
    "lam_list": [0.0, 1.0],
    "n_bins": 20,
    "chunk_paths": 1024,
    "positions": [0.125, 0.25, 0.5, 0.75, 0.875],
    "out": ".",
}

_KNOWN_KEYS = set(_DEFAULTS) | {
    "experiment", "a", "A", "Sigma", "eps", "eps_list", "T", "T_list", "t_list",
    "x0", "x0_panel", "box", "times",
}

_REQUIRED = {
    "drivers-check": ("eps", "T"),
    "spectral-cert": ("model",),
    "linear-exact": ("a", "T"),
    "coupled-error": ("eps", "T"),
    "rates": ("eps_list", "T"),
    "milstein-residual": ("eps_list", "T"),
    "orthogonality": ("eps_list", "T"),
    "wz-integral": ("eps_list", "t_list"),
    "moments-uniform": ("eps", "T_list"),
}


@dataclass
class ExperimentConfig:
    experiment: str
    raw: dict = field(default_factory=dict)

    def get(self, key, fallback=None):
        if key in self.raw:
            return self.raw[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        return fallback

    def eps_values(self):
        if "eps_list" in self.raw:
            return [float(e) for e in self.raw["eps_list"]]
        if "eps" in self.raw:
            return [float(self.raw["eps"])]
        return []

    def x0_panel(self):
        if "x0_panel" in self.raw:
            return [float(v) for v in self.raw["x0_panel"]]
        return [float(self.get("x0", 0.0))]

    def to_dict(self):
        d = dict(self.raw)
        d["experiment"] = self.experiment
        d.pop("out", None)
        return d


def config_hash(config):
    blob = json.dumps(config.to_dict(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def parse_config(text, experiment=None):
    """Parse key = value config text; raises ConfigError with ALL violations."""
    raw = {}
    violations = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            raw[key] = json.loads(value)
        except json.JSONDecodeError:
            raw[key] = value
    exp = raw.pop("experiment", experiment)
    if experiment is not None and exp != experiment:
        violations.append(f"config experiment {exp!r} does not match requested {experiment!r}")
    if exp is None:
        violations.append("missing key 'experiment'")
    elif exp not in EXPERIMENTS:
        violations.append(f"unknown experiment {exp!r}; known: {', '.join(EXPERIMENTS)}")
    else:
        for key in _REQUIRED[exp]:
            if key not in raw:
                violations.append(f"experiment {exp!r} requires key {key!r}")
    model = raw.get("model", _DEFAULTS["model"])
    if model not in builtin_models():
        violations.append(f"unknown model {model!r}; registry has {sorted(builtin_models())}")
    driver = raw.get("driver", _DEFAULTS["driver"])
    if driver not in ("polygonal", "ou"):
        violations.append(f"unknown driver {driver!r}")
    if raw.get("kernel", _DEFAULTS["kernel"]) not in ("sin", "const"):
        violations.append(f"unknown kernel {raw.get('kernel')!r}")
    if raw.get("condition", _DEFAULTS["condition"]) not in CONDITIONS:
        violations.append(f"unknown condition {raw.get('condition')!r}")
    for key in ("m", "substeps", "paths", "seed", "grid_n", "n_bins", "chunk_paths"):
        if key in raw:
            try:
                raw[key] = int(raw[key])
                if raw[key] < 0 or (key != "seed" and raw[key] == 0):
                    violations.append(f"key {key!r} must be positive")
            except (TypeError, ValueError):
                violations.append(f"key {key!r} must be an integer, got {raw[key]!r}")
    horizon = raw.get("T")
    if horizon is not None:
        for eps in (raw.get("eps_list") or ([raw["eps"]] if "eps" in raw else [])):
            try:
                n = float(horizon) / float(eps)
                if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
                    violations.append(f"T/eps not integral: {horizon}/{eps}")
            except (TypeError, ValueError, ZeroDivisionError):
                violations.append(f"bad eps value {eps!r}")
    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(exp, raw)


@dataclass
class RunManifest:
    experiment: str
    config: dict
    config_hash: str
    version: str
    wall_time_s: float
    outputs: list
    gates: dict
    passed: bool

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, default=str)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path, columns, rows, header_lines):
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _build_model(config):
    name = config.get("model")
    if name == "linear1d":
        return get_model(name, a=float(config.get("a", -1.0)))
    if name == "linear_nd":
        return get_model(name, A=config.get("A"), Sigma=config.get("Sigma"))
    return get_model(name)


def _header(config, experiment, units):
    return [f"wz-lab {experiment} v{__version__}",
            f"config_hash={config_hash(config)}",
            f"units: {units}"]


# ---------------------------------------------------------------------------
# experiment runners (return (outputs, gates))
# ---------------------------------------------------------------------------

def _run_linear_exact(config, outdir, threads):
    a = float(config.get("a"))
    T = float(config.get("T"))
    rows = []
    ok_all = True
    for eps in config.eps_values():
        ns = np.arange(0, int(round(T / eps)) + 1)
        t = ns * eps
        var = exact_linear_variance(a, eps, ns)
        if a > 0:
            lo, hi = lg_unstable_envelope(a, eps, t)
            ok = (var >= lo * (1.0 - SANDWICH_SLACK)) & (var <= hi * (1.0 + SANDWICH_SLACK))
            for i in range(len(ns)):
                rows.append((eps, ns[i], t[i], var[i], lo[i], hi[i], bool(ok[i])))
        else:
            bound = lg_stable_bound(a, eps) if a < 0 else float("inf")
            ok = var <= bound * (1.0 + SANDWICH_SLACK)
            for i in range(len(ns)):
                rows.append((eps, ns[i], t[i], var[i], bound, bound, bool(ok[i])))
        ok_all &= bool(np.all(ok))
    cols = ("eps", "n", "t_n", "exact_var", "lower_bound", "upper_bound", "pass")
    path = os.path.join(outdir, "linear_exact.csv")
    _write_csv(path, cols, rows, _header(config, "linear-exact",
               "t_n in time units; variances in state^2"))
    return [path], {"bound_inequalities": ok_all}


def _run_spectral_cert(config, outdir, threads):
    model = _build_model(config)
    condition = config.get("condition")
    box = config.get("box") or model.box
    grid_n = config.get("grid_n")
    rep = certify(model, condition, box=box, grid_n=grid_n)
    lam_delta = ""
    if condition == "H_b" and rep.holds:
        lam_delta = theorem_rate(model, box=box, grid_n=grid_n)
    rows = [(rep.condition, rep.sup_value,
             rep.lam if rep.lam is not None else "",
             ";".join(repr(float(v)) for v in np.atleast_1d(rep.arg_point)),
             box[0], box[1], grid_n, lam_delta)]
    cols = ("condition", "sup_value", "lambda", "arg_point", "box_lo", "box_hi",
            "grid_n", "lambda_delta")
    path = os.path.join(outdir, "spectral_cert.csv")
    _write_csv(path, cols, rows, _header(config, "spectral-cert",
               "sup_value/lambda in 1/time units; box in state units"))
    return [path], {"condition_holds": rep.holds}


def _run_drivers_check(config, outdir, threads):
    eps = float(config.get("eps"))
    T = float(config.get("T"))
    m = config.get("m")
    n_paths = config.get("paths")
    seed = config.get("seed")
    driver = config.get("driver")
    delta = eps / m
    if driver == "polygonal":
        targets = [float(u) for u in config.get("positions")]
    else:
        targets = [float(t) for t in config.get("times", [eps, 5 * eps, T])]
    res = driver_moment_experiment(driver, eps, T, m, targets, n_paths,
                                   seed=seed, n_jobs=threads,
                                   chunk_paths=config.get("chunk_paths"))
    rows = []
    ok_all = True
    for tgt in targets:
        for p, acc in zip((1, 2), res[tgt]):
            t_for_formula = tgt * eps if driver == "polygonal" else tgt
            formula = float(driver_gap_moments(driver, eps, t_for_formula, p))
            tol = SE_GATE * float(acc.std_error)
            if driver == "ou":
                # explicit-Euler OU smoothing carries an O(delta) variance bias
                v = float(driver_gap_moments(driver, eps, t_for_formula, 1))
                tol += p * math.prod(range(2 * p - 1, 0, -2)) * v ** (p - 1) * delta
            ok = abs(float(acc.mean) - formula) <= tol
            ok_all &= ok
            rows.append((driver, tgt, 2 * p, float(acc.mean), float(acc.std_error),
                         formula, tol, ok))
    cols = ("driver", "target", "moment_order", "mc", "se", "formula", "tol", "pass")
    path = os.path.join(outdir, "drivers_check.csv")
    _write_csv(path, cols, rows, _header(config, "drivers-check",
               "target: intra-cell position u (polygonal) or time t (ou); moments in time^p"))
    return [path], {"moment_formulas": ok_all}


def _run_coupled_error(config, outdir, threads):
    model = _build_model(config)
    eps = float(config.get("eps"))
    T = float(config.get("T"))
    m = config.get("m")
    driver = config.get("driver")
    panel = config.x0_panel()
    reports = coupled_error_experiment(
        model, driver, eps, T, m, panel, config.get("paths"),
        p_moments=tuple(config.get("p_moments")), seed=config.get("seed"),
        n_jobs=threads, substeps=config.get("substeps"),
        chunk_paths=config.get("chunk_paths"))
    has_oracle = (model.name == "linear1d" and driver == "polygonal")
    a = model.params.get("a")
    rows = []
    ok_all = True
    for rep, x0 in zip(reports, panel):
        ns = np.arange(len(rep.times))
        oracle = exact_linear_variance(a, eps, ns) if has_oracle else None
        bound = lg_stable_bound(a, eps) if has_oracle and a < 0 else None
        for i in ns:
            if has_oracle:
                ok = abs(rep.l2[i] - oracle[i]) <= SE_GATE * rep.l2_se[i] if i > 0 else True
                ok_all &= ok
            else:
                ok = ""
            rows.append((x0, i, rep.times[i], rep.l2[i], rep.l2_se[i],
                         oracle[i] if has_oracle else "",
                         bound if bound is not None else "", ok))
    cols = ("x0", "n", "t_n", "l2_gap", "se", "exact_oracle", "bound_value", "pass")
    path = os.path.join(outdir, "coupled_error.csv")
    _write_csv(path, cols, rows, _header(config, "coupled-error",
               "t_n in time units; l2_gap = E||X - Xbar||^2 in state^2"))
    gates = {"oracle_within_4se": ok_all} if has_oracle else {"completed": True}
    return [path], gates


def _run_rates(config, outdir, threads):
    model = _build_model(config)
    eps_list = config.eps_values()
    report = rate_experiment(
        model, config.get("driver"), eps_list, float(config.get("T")),
        config.get("m"), config.x0_panel(), config.get("paths"),
        seed=config.get("seed"), n_jobs=threads, substeps=config.get("substeps"),
        chunk_paths=config.get("chunk_paths"))
    rows = []
    ok_all = True
    for q, x0 in enumerate(report.x0_panel):
        fit = report.fits[q]
        ok = SLOPE_WINDOW_SQRT[0] <= fit.slope <= SLOPE_WINDOW_SQRT[1]
        ok_all &= ok
        for e, eps in enumerate(eps_list):
            rows.append((x0, eps, report.sup_rms[q, e], report.sup_rms_se[q, e],
                         fit.slope, 1.96 * fit.slope_se, ok))
    cols = ("x0", "eps", "err", "se", "slope", "slope_ci", "pass")
    path = os.path.join(outdir, "rates.csv")
    _write_csv(path, cols, rows, _header(config, "rates",
               "err = sup_n sqrt(E||gap||^2) in state units"))
    return [path], {"slope_in_[0.4,0.6]": ok_all}


def _run_milstein_residual(config, outdir, threads):
    model = _build_model(config)
    rep = milstein_residual_experiment(
        model, config.eps_values(), float(config.get("T")), config.get("m"),
        config.x0_panel()[0], config.get("paths"), seed=config.get("seed"),
        n_jobs=threads, n_bins=config.get("n_bins"),
        substeps=config.get("substeps"), chunk_paths=config.get("chunk_paths"))
    rows = []
    for e, eps in enumerate(rep.eps_list):
        rows.append((eps, rep.xbar_l2[e], rep.xbar_l2_se[e], rep.x_l2[e],
                     rep.x_l2_se[e], rep.x_mean_abs[e], rep.x_mean_se[e],
                     rep.condmean_l2[e]))
    cols = ("eps", "xbar_res_l2", "xbar_se", "x_res_l2", "x_se", "x_mean_abs",
            "x_mean_se", "condmean_l2")
    path = os.path.join(outdir, "milstein_residual.csv")
    _write_csv(path, cols, rows, _header(config, "milstein-residual",
               "residual L2 norms in state units, per coarse step"))
    fit_rows = [(name, fit.slope, 1.96 * fit.slope_se, fit.intercept)
                for name, fit in rep.fits.items()]
    fits_path = os.path.join(outdir, "milstein_residual_fits.csv")
    _write_csv(fits_path, ("series", "slope", "slope_ci", "intercept"), fit_rows,
               _header(config, "milstein-residual", "log-log fits over eps"))
    xbar_ok = SLOPE_WINDOW_XBAR[0] <= rep.fits["xbar_l2"].slope <= SLOPE_WINDOW_XBAR[1]
    mean_ok = rep.fits["x_mean_abs"].slope >= SLOPE_MIN_MEAN
    return [path, fits_path], {"xbar_slope_in_[1.3,1.7]": xbar_ok,
                               "mean_slope_ge_1.4": mean_ok}


def _run_orthogonality(config, outdir, threads):
    model = _build_model(config)
    eps_values = config.eps_values()
    if len(eps_values) < 2:
        raise ConfigError(["orthogonality needs eps_list = [reference_eps, test_eps, ...]"])
    T = float(config.get("T"))
    x0 = config.x0_panel()[0]
    reports = [orthogonality_check(model, eps, T, config.get("m"), x0,
                                   config.get("paths"), seed=config.get("seed"),
                                   n_jobs=threads, chunk_paths=config.get("chunk_paths"))
               for eps in eps_values]
    c = orthogonality_bias_scale(reports[0])
    rows = []
    ok_all = True
    for i, rep in enumerate(reports):
        role = "reference" if i == 0 else "test"
        for name, (mean, se) in rep.entries.items():
            val = float(np.max(np.abs(mean)))
            se_val = float(np.max(se))
            tol = SE_GATE * se_val + c * math.sqrt(rep.eps)
            ok = val <= tol
            if role == "test":
                ok_all &= ok
            rows.append((rep.eps, role, name, val, se_val, tol, ok))
    cols = ("eps", "role", "entry", "abs_mean", "se", "tol", "pass")
    path = os.path.join(outdir, "orthogonality.csv")
    _write_csv(path, cols, rows, _header(config, "orthogonality",
               f"dM extracted as residual/eps; bias constant c = {c!r}"))
    return [path], {"orthogonality_within_tol": ok_all}


def _run_wz_integral(config, outdir, threads):
    model = _build_model(config)
    eps_list = config.eps_values()
    t_list = [float(t) for t in config.get("t_list")]
    x0 = config.x0_panel()[0]
    make_kernel = sin_kernel if config.get("kernel") == "sin" else const_kernel
    rows = []
    fit_rows = []
    gates = {}
    for lam in config.get("lam_list"):
        kernel = make_kernel(float(lam))
        rep = remainder_experiment(
            model, kernel, eps_list, t_list, x0, config.get("paths"),
            config.get("m"), seed=config.get("seed"), n_jobs=threads,
            flow=config.get("flow"), substeps=config.get("substeps"),
            chunk_paths=config.get("chunk_paths"))
        c = rep.l2[0, 0] / theorem4_envelope(1.0, rep.lam, rep.eps_list[0],
                                             rep.t_list[0], abs(x0))
        for e, eps in enumerate(rep.eps_list):
            for ti, t in enumerate(rep.t_list):
                rows.append((rep.lam, eps, t, rep.l2[e, ti], rep.l2_se[e, ti],
                             theorem4_envelope(c, rep.lam, eps, t, abs(x0)),
                             e_lambda(rep.lam, t)))
        slope_ok = SLOPE_WINDOW_SQRT[0] <= rep.fit.slope <= SLOPE_WINDOW_SQRT[1]
        gates[f"slope_lam={lam}"] = slope_ok
        plateau = float(np.max(np.abs(rep.plateau_ratio() - 1.0)))
        if lam > 0:
            gates[f"plateau_lam={lam}"] = plateau <= PLATEAU_REL
        fit_rows.append((rep.lam, rep.fit.slope, 1.96 * rep.fit.slope_se, plateau))
    path = os.path.join(outdir, "wz_integral.csv")
    _write_csv(path, ("lam", "eps", "t", "l2_remainder", "se", "bound_envelope",
                      "e_lambda_t"), rows,
               _header(config, "wz-integral", "remainders in state units"))
    fits_path = os.path.join(outdir, "wz_integral_fits.csv")
    _write_csv(fits_path, ("lam", "slope", "slope_ci", "plateau_dev"), fit_rows,
               _header(config, "wz-integral", "slope of L2 remainder in eps at max t"))
    return [path, fits_path], gates


def _run_moments_uniform(config, outdir, threads):
    model = _build_model(config)
    T_list = sorted(float(t) for t in config.get("T_list"))
    rep = moments_uniform_experiment(
        model, float(config.get("eps")), T_list, config.x0_panel()[0],
        config.get("paths"), seed=config.get("seed"), n_jobs=threads,
        substeps=config.get("substeps", 64), chunk_paths=config.get("chunk_paths"))
    rows = []
    ok_all = True
    prev = None
    for T in T_list:
        data = rep.per_T[T]
        growth = (data["sup"] / prev - 1.0) if prev else 0.0
        ok = growth <= MOMENT_GROWTH_REL
        if prev:
            ok_all &= ok
        rows.append((T, data["sup_node"], data["times"][data["sup_node"]],
                     data["sup"], float(data["se"][data["sup_node"]]), growth, ok))
        prev = data["sup"]
    cols = ("T", "sup_node", "t_sup", "sup_E_abs_p", "se", "growth_vs_prev", "pass")
    path = os.path.join(outdir, "moments_uniform.csv")
    _write_csv(path, cols, rows, _header(config, "moments-uniform",
               f"E||Xbar||^{rep.p} per coarse node, sup over nodes"))
    return [path], {"sup_moment_growth_le_5pct": ok_all}


_RUNNERS = {
    "linear-exact": _run_linear_exact,
    "spectral-cert": _run_spectral_cert,
    "drivers-check": _run_drivers_check,
    "coupled-error": _run_coupled_error,
    "rates": _run_rates,
    "milstein-residual": _run_milstein_residual,
    "orthogonality": _run_orthogonality,
    "wz-integral": _run_wz_integral,
    "moments-uniform": _run_moments_uniform,
}


def run(config, threads=1, out_dir=None):
    """Dispatch one experiment; writes CSVs and a manifest, returns the manifest."""
    outdir = out_dir or config.get("out")
    os.makedirs(outdir, exist_ok=True)
    t0 = time.perf_counter()
    outputs, gates = _RUNNERS[config.experiment](config, outdir, threads)
    wall = time.perf_counter() - t0
    manifest = RunManifest(
        experiment=config.experiment, config=config.to_dict(),
        config_hash=config_hash(config), version=__version__,
        wall_time_s=wall, outputs=[os.path.basename(p) for p in outputs],
        gates=gates, passed=all(gates.values()),
    )
    manifest.write(os.path.join(outdir, f"{config.experiment}-manifest.json"))
    return manifest


def main(argv=None):
    parser = argparse.ArgumentParser(prog="wz-lab",
                                     description="Wong-Zakai approximation lab")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: WZ_LAB_THREADS or 1)")
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = parse_config(fh.read(), experiment=args.experiment)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config.raw["seed"] = args.seed
    threads = args.threads if args.threads is not None else default_jobs()
    try:
        manifest = run(config, threads=threads, out_dir=args.out)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name, ok in manifest.gates.items():
        print(f"{'PASS' if ok else 'FAIL'}  {config.experiment}:{name}")
    print(f"outputs: {', '.join(manifest.outputs)} "
          f"({manifest.wall_time_s:.2f}s, hash {manifest.config_hash})")
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
