"""Command-line experiment runner.

Every subcommand reads a flat ``key = value`` config file (``--config``) and
per-key flag overrides (``--R 2``), writes ``<name>.csv`` with raw results and
``<name>.summary.txt`` with the resolved parameters, estimates and verdicts.
Exit codes: 0 all verdicts pass, 1 some verdict failed, 2 configuration or
runtime error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import completeness as comp
from . import pde1d, spectral3d, stats
from .drifts import FoliationBounds, SasakianModelSpec, f_rie, f_sas, sasakian_drift
from .groups import ball_volume_mc, heisenberg, quaternionic_heisenberg
from .sde import (
    SimConfig,
    default_workers,
    simulate_group_paths,
    simulate_radial_paths,
)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class ConfigError(ValueError):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    if text in (None, "", "none", "None"):
        return None
    return int(text)


# shared key groups: name -> (parser, default, help)
_MODEL = {
    "kind": (str, "sasakian", "comparison model: sasakian or htype"),
    "n": (int, 2, "horizontal dimension"),
    "k1": (float, 0.0, "horizontal curvature bound"),
    "k2": (float, 0.0, "vertical curvature bound"),
    "m": (_opt_int, None, "vertical dimension (htype)"),
}
_MC = {
    "n_paths": (int, 100_000, "number of paths"),
    "dt": (float, 1e-4, "time step"),
    "seed": (int, 0, "master seed"),
}
_GROUP = {"group": (str, "heisenberg", "heisenberg or quaternionic")}

SCHEMAS = {
    "drift-table": {
        **_MODEL,
        "r_min": (float, 0.1, "smallest radius"),
        "r_max": (float, 3.0, "largest radius"),
        "n_r": (int, 30, "number of radii"),
    },
    "dominance-test": {
        **_GROUP, **_MODEL, **_MC,
        "R": (float, 2.0, "absorbing radius"),
        "t": (float, 0.25, "time"),
        "delta": (float, 1e-3, "DKW failure probability per side"),
        "thresholds": (_floats, "0.2,0.4,0.6,0.8,1.0,1.2,1.4,1.6,1.8", "values of s"),
    },
    "exit-times": {
        **_GROUP, **_MODEL, **_MC,
        "R": (float, 1.0, "ball radius"),
        "horizon": (float, 2.0, "simulation horizon (censoring time)"),
        "bridge": (_bool, True, "Brownian-bridge crossing correction"),
        "rel_tol": (float, 0.01, "relative tolerance for the model mean"),
        "confidence": (float, 0.99, "CI level"),
    },
    "eigen-1d": {
        **_MODEL,
        "R": (float, 1.0, "interval length"),
        "n_cells": (int, 4096, "cells of the fine grid"),
        "rel_tol": (float, 1e-4, "tolerance against the Bessel reference (flat case)"),
    },
    "eigen-3d": {
        "R": (float, 1.0, "ball radius"),
        "cells": (int, 96, "cells per axis, fine grid"),
        "coarse_cells": (int, 48, "cells per axis, coarse grid"),
        "pad": (float, 1.1, "box margin factor"),
        "preconditioner": (str, "jacobi", "jacobi, amg or none"),
        "export": (str, "", "write the fine matrix to this coordinate text file"),
    },
    "mc-lambda1": {
        **_GROUP, **_MC,
        "R": (float, 1.0, "ball radius"),
        "horizon": (float, 1.5, "simulation horizon"),
        "n_paths": (int, 50_000, "number of paths"),
        "allowance": (float, 0.1, "relative statistical allowance on the bound"),
    },
    "heat-compare": {
        **_GROUP, **_MODEL, **_MC,
        "R": (float, 2.0, "absorbing radius"),
        "s_values": (_floats, "0.5,1.0,1.5", "thresholds"),
        "t_values": (_floats, "0.1,0.25,0.5", "times"),
        "delta": (float, 1e-3, "DKW failure probability"),
        "n_cells": (int, 2048, "PDE cells"),
    },
    "volume-scaling": {
        **_GROUP,
        "s_values": (_floats, "0.4,0.6,0.8,1.0,1.2", "radii for the volume fit"),
        "n_samples": (int, 2_000_000, "uniform samples"),
        "seed": (int, 0, "master seed"),
        "heat_s": (_floats, "0.02,0.03,0.05,0.08,0.12,0.2", "thresholds for the heat fit"),
        "heat_t": (float, 0.25, "time for the heat fit"),
        "heat_r0": (float, 0.5, "start radius for the heat fit"),
        "heat_R": (float, 2.0, "absorbing radius for the heat fit"),
        "n_cells": (int, 4096, "PDE cells"),
        "slope_tol": (float, 0.1, "tolerance on both slopes"),
    },
    "qv-check": {
        **_GROUP, **_MC,
        "t": (float, 0.25, "time"),
        "n_paths": (int, 10_000, "number of paths"),
        "dt": (float, 1e-5, "time step"),
        "rel_tol": (float, 0.05, "relative tolerance"),
    },
    "lil-check": {
        **_GROUP, **_MC,
        "T": (float, 64.0, "final time"),
        "dt": (float, 4e-3, "time step"),
        "n_paths": (int, 10_000, "number of paths"),
        "level": (float, 1.15, "exceedance level"),
        "max_fraction": (float, 0.05, "allowed exceedance fraction"),
        "large_times": (_floats, "1,4,16", "times for the mean d/T trend"),
    },
    "completeness-check": {
        "instance": (str, "quadratic", "quadratic, constant or cubic"),
        "n": (int, 2, "horizontal dimension"),
        "K0": (float, 1.0, "curvature size for the constant instance"),
        "s_max": (float, 1e15, "search horizon"),
        "tol": (float, 1e-9, "relative bisection tolerance"),
    },
    "barrier-probe": {
        "c1": (float, 1.0, "growth constant"),
        "C0": (float, 1.0, "drift constant"),
        "n": (int, 2, "horizontal dimension"),
        "r0": (float, 0.0, "start value"),
        "sigma2": (float, 1.0, "noise variance"),
        "horizon": (float, 1.0, "time horizon"),
        "n_paths": (int, 10_000, "number of paths"),
        "dt": (float, 1e-3, "time step"),
        "seed": (int, 0, "master seed"),
    },
}

CLAIMS = {
    "drift-table": "explicit comparison drifts and their flat limits",
    "dominance-test": "radial comparison: hitting-time dominance over the Sasakian model",
    "exit-times": "mean exit time from CC balls bounded below by the model",
    "eigen-1d": "first Dirichlet eigenvalue of the one-dimensional model",
    "eigen-3d": "first Dirichlet eigenvalue of the CC ball bounded by the model value",
    "mc-lambda1": "first Dirichlet eigenvalue of the CC ball bounded by the model value",
    "heat-compare": "Dirichlet heat content comparison with the model",
    "volume-scaling": "homogeneous dimension versus comparison dimension",
    "qv-check": "quadratic variation of the radial process",
    "lil-check": "iterated-logarithm surrogate and large-time growth",
    "completeness-check": "curvature criterion for stochastic completeness",
    "barrier-probe": "non-explosion through the Gaussian barrier process",
}


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict
    out_dir: str = "."
    name: str = ""
    workers: int = 1
    sources: dict = field(default_factory=dict)

    @property
    def stem(self):
        return os.path.join(self.out_dir, self.name or self.subcommand)


@dataclass
class Outcome:
    header: list
    rows: list
    verdicts: dict
    estimates: dict


def read_config_file(path, subcommand):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    schema = SCHEMAS[subcommand]
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in schema:
                raise ConfigError(f"unknown config key '{key}' for {subcommand}")
            out[key] = value
    return out


def resolve(subcommand, file_values, flag_values):
    """Defaults, then file values, then flags; every value parsed by the schema."""
    schema = SCHEMAS[subcommand]
    params, sources = {}, {}
    for key, (parse, default, _) in schema.items():
        raw, src = default, "default"
        if key in file_values:
            raw, src = file_values[key], "file"
        if flag_values.get(key) is not None:
            raw, src = flag_values[key], "flag"
        try:
            params[key] = parse(raw) if raw is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for key '{key}': {raw!r} ({exc})") from None
        sources[key] = src
    return params, sources


def _model(p):
    return SasakianModelSpec(n=p["n"], k1=p["k1"], k2=p["k2"], kind=p["kind"], m=p["m"])


def _group(p):
    name = p["group"]
    if name == "heisenberg":
        return heisenberg()
    if name in ("quaternionic", "quaternionic_heisenberg"):
        return quaternionic_heisenberg()
    raise ConfigError(f"unknown group '{name}'")


def _group_model(p):
    """Comparison model of the chosen group unless the model keys say otherwise."""
    g = _group(p)
    if g.m > 1 and p["kind"] == "sasakian" and p["n"] == 2:
        return g, SasakianModelSpec(n=g.n, kind="htype", m=g.m)
    return g, _model(p)


def _sim(p, horizon, bridge=False):
    return SimConfig(dt=p["dt"], horizon=horizon, n_paths=p["n_paths"], seed=p["seed"],
                     bridge=bridge)


# ---------------------------------------------------------------- handlers

def run_drift_table(p, workers):
    spec = _model(p)
    r = np.linspace(p["r_min"], p["r_max"], p["n_r"])
    lim = spec.domain_limit()
    r = r[r < lim]
    rows = []
    flat_ok = True
    for x in r:
        rows.append([x, f_rie(x, spec.k2), f_sas(x, spec.k1), sasakian_drift(x, spec)])
        flat_ok &= f_rie(x, 0.0) == 1.0 / x and f_sas(x, 0.0) == 4.0 / x
    finite = all(np.isfinite(v) for row in rows for v in row)
    return Outcome(["r", "f_rie", "f_sas", "drift"], rows,
                   {"finite": finite, "flat_identities": bool(flat_ok)},
                   {"domain_limit": lim, "n_rows": len(rows)})


def run_dominance(p, workers):
    g, model = _group_model(p)
    cfg = _sim(p, p["t"])
    lhs = simulate_group_paths(g, None, p["R"], cfg, freeze=False, workers=workers)
    rhs = simulate_radial_paths(model, 0.0, p["R"], cfg, freeze=False, workers=workers)
    rep = stats.dominance_test(stats.CensoredSample.from_batch(lhs, p["t"]),
                               stats.CensoredSample.from_batch(rhs, p["t"]),
                               p["thresholds"], p["delta"], R=p["R"])
    rows = [[s, a, b, m, bool(ok)] for s, a, b, m, ok in
            zip(rep.thresholds, rep.lhs_cdf, rep.rhs_cdf, rep.margin, rep.passed)]
    return Outcome(["s", "lhs_cdf", "rhs_cdf", "margin", "pass"], rows,
                   {"dominance": rep.verdict},
                   {"worst_gap": rep.worst_gap, "margin": float(rep.margin[0])})


def run_exit_times(p, workers):
    g, model = _group_model(p)
    cfg = _sim(p, p["horizon"], bridge=p["bridge"])
    exact = pde1d.mean_exit_1d(model, p["R"], 0.0)
    rb = simulate_radial_paths(model, 0.0, p["R"], cfg, workers=workers)
    gb = simulate_group_paths(g, None, p["R"], cfg, workers=workers)
    censored = int(np.isinf(rb.hit_times).sum() + np.isinf(gb.hit_times).sum())
    m_mean, m_ci = stats.mean_with_ci(np.minimum(rb.hit_times, p["horizon"]), p["confidence"])
    g_mean, g_ci = stats.mean_with_ci(np.minimum(gb.hit_times, p["horizon"]), p["confidence"])
    rows = [["model_mc", m_mean, m_ci], ["model_quadrature", exact, 0.0], ["group_mc", g_mean, g_ci]]
    verdicts = {
        "model_matches_quadrature": abs(m_mean - exact) <= p["rel_tol"] * exact,
        "group_exit_at_least_model": g_mean >= exact - g_ci,
        "no_censoring": censored == 0,
    }
    return Outcome(["quantity", "mean", "ci_half_width"], rows, verdicts,
                   {"model_mc": m_mean, "model_quadrature": exact, "group_mc": g_mean,
                    "group_ci": g_ci, "censored_paths": censored})


def run_eigen_1d(p, workers):
    spec = _model(p)
    est = pde1d.eigen_1d(spec, p["R"], p["n_cells"])
    ref = pde1d.bessel_reference(spec.bessel_dimension, p["R"]).value
    verdicts = {"positive": est.value > 0}
    if spec.k1 == 0 and spec.k2 == 0:
        verdicts["matches_bessel_reference"] = abs(est.value - ref) <= p["rel_tol"] * ref
    rows = [["fine", est.extra["fine"]], ["coarse", est.extra["coarse"]],
            ["richardson", est.value], ["bessel_reference", ref]]
    return Outcome(["estimate", "value"], rows, verdicts,
                   {"value": est.value, "error_indicator": est.error_indicator,
                    "bessel_reference": ref})


def run_eigen_3d(p, workers):
    pre = None if p["preconditioner"] == "none" else p["preconditioner"]
    est = spectral3d.eigen_3d(p["R"], (p["coarse_cells"], p["cells"]), p["pad"],
                              preconditioner=pre)
    ref = pde1d.bessel_reference(5, p["R"]).value
    rows = [[c, v] for c, v in zip((p["coarse_cells"], p["cells"]), est.extra["values"])]
    if p["export"]:
        op = spectral3d.assemble_sub_laplacian(spectral3d.build_grid3d(p["R"], p["cells"], p["pad"]))
        spectral3d.export_coo(op, p["export"])
    return Outcome(["cells", "eigenvalue"], rows,
                   {"within_model_bound": 0.0 < est.value <= ref},
                   {"value": est.value, "richardson_indicator": est.error_indicator,
                    "model_bound": ref})


def run_mc_lambda1(p, workers):
    g = _group(p)
    cfg = _sim(p, p["horizon"], bridge=True)
    est = spectral3d.mc_lambda1(g, p["R"], cfg, workers=workers)
    bound = pde1d.bessel_reference(g.comparison_dimension, p["R"]).value
    t1, t2 = est.extra["window"]
    rows = [[est.value, est.error_indicator, t1, t2, bound]]
    return Outcome(["rate", "ci_half_width", "t1", "t2", "model_bound"], rows,
                   {"below_bound_with_allowance": est.value <= bound * (1.0 + p["allowance"])},
                   {"value": est.value, "ci": est.error_indicator, "model_bound": bound})


def heat_tables(p, workers):
    """Group MC left side and PDE right side on the (s, t) grid."""
    g, model = _group_model(p)
    ts = sorted(p["t_values"])
    cfg = _sim(p, ts[-1])
    batch = simulate_group_paths(g, None, p["R"], cfg, checkpoints=ts, freeze=False,
                                 workers=workers)
    fine = pde1d.survival_cdf(model, p["R"], 0.0, ts, p["s_values"], n_cells=p["n_cells"])
    coarse = pde1d.survival_cdf(model, p["R"], 0.0, ts, p["s_values"], n_cells=p["n_cells"] // 2)
    return batch, ts, fine, np.abs(fine - coarse)


def run_heat_compare(p, workers):
    batch, ts, fine, pde_err = heat_tables(p, workers)
    rows, ok_all = [], True
    for j, t in enumerate(ts):
        rep = stats.dominance_test(stats.CensoredSample.from_batch(batch, t), fine[:, j],
                                   p["s_values"], p["delta"], R=p["R"],
                                   rhs_tolerance=float(pde_err[:, j].max()))
        for i, s in enumerate(rep.thresholds):
            rows.append([s, t, rep.lhs_cdf[i], rep.rhs_cdf[i], rep.margin[i], bool(rep.passed[i])])
        ok_all &= rep.verdict
    return Outcome(["s", "t", "mc_lhs", "pde_rhs", "margin", "pass"], rows,
                   {"heat_content_dominance": bool(ok_all)},
                   {"max_pde_discrepancy": float(pde_err.max())})


def run_volume_scaling(p, workers):
    g = _group(p)
    s = np.array(p["s_values"])
    vols, counts, box = ball_volume_mc(g, s, p["n_samples"], p["seed"])
    v_slope, v_ci = stats.loglog_slope(s, vols)
    model = SasakianModelSpec(n=g.n, kind="htype", m=g.m) if g.m > 1 else SasakianModelSpec(n=g.n)
    hs = np.array(p["heat_s"])
    heat = pde1d.survival_cdf(model, p["heat_R"], p["heat_r0"], p["heat_t"], hs,
                              n_cells=p["n_cells"])[:, 0]
    h_slope, h_ci = stats.loglog_slope(hs, heat)
    rows = [["volume", x, v] for x, v in zip(s, vols)] + [["heat", x, v] for x, v in zip(hs, heat)]
    return Outcome(["series", "s", "value"], rows,
                   {"volume_slope": abs(v_slope - g.homogeneous_dimension) <= p["slope_tol"],
                    "heat_slope": abs(h_slope - model.bessel_dimension) <= p["slope_tol"]},
                   {"volume_slope": v_slope, "volume_slope_ci": v_ci,
                    "homogeneous_dimension": g.homogeneous_dimension,
                    "heat_slope": h_slope, "heat_slope_ci": h_ci,
                    "comparison_dimension": model.bessel_dimension})


def run_qv_check(p, workers):
    g = _group(p)
    cfg = _sim(p, p["t"])
    batch = simulate_group_paths(g, None, math.inf, cfg, freeze=False, qv_levels=1,
                                 workers=workers)
    qv = batch.qv
    target = 2.0 * p["t"]
    med = float(np.median(qv))
    rows = [[i, q] for i, q in enumerate(qv)]
    return Outcome(["path", "realized_qv"], rows,
                   {"median_within_tolerance": abs(med - target) <= p["rel_tol"] * target,
                    "max_below_bound": float(qv.max()) <= target * (1.0 + p["rel_tol"])},
                   {"median": med, "max": float(qv.max()), "target": target})


def run_lil_check(p, workers):
    g = _group(p)
    times = sorted(set(p["large_times"]) | {p["T"]})
    cfg = _sim(p, p["T"])
    batch = simulate_group_paths(g, None, math.inf, cfg, checkpoints=times, freeze=False,
                                 workers=workers)
    frac = stats.lil_statistic(batch.values_at(p["T"]), p["T"], p["level"])
    rows, means = [], []
    for t in times:
        d = batch.values_at(t)
        mean, ci = stats.mean_with_ci(d / t)
        means.append(mean)
        rows.append([t, mean, ci, stats.lil_statistic(d, t, p["level"]) if t > math.e else ""])
    trend = [m for t, m in zip(times, means) if t in p["large_times"]]
    return Outcome(["t", "mean_d_over_t", "ci_half_width", "lil_fraction"], rows,
                   {"lil_fraction_below_max": frac < p["max_fraction"],
                    "mean_d_over_t_decreasing": bool(np.all(np.diff(trend) < 0))},
                   {"lil_fraction": frac, "scale": math.sqrt(2 * p["T"] * math.log(math.log(p["T"])))})


def _instance(p):
    n = p["n"]
    if p["instance"] == "quadratic":
        return FoliationBounds(rho1=lambda s: -n * (1.0 + np.asarray(s) ** 2), kappa=0.0), 1.0
    if p["instance"] == "constant":
        return FoliationBounds(rho1=-p["K0"], kappa=0.0), p["K0"] / n
    if p["instance"] == "cubic":
        return FoliationBounds(rho1=lambda s: -np.asarray(s) ** 3, kappa=0.0), None
    raise ConfigError(f"unknown instance '{p['instance']}'")


def run_completeness(p, workers):
    bounds, expected = _instance(p)
    cert = comp.minimal_c1(bounds, p["n"], s_max=p["s_max"], tol=p["tol"])
    gres = comp.g_identity_check(cert.c1 if cert.feasible else 1.0, np.linspace(0, 3, 31))
    idx = np.unique(np.geomspace(1, cert.s_grid.size - 1, 60).astype(int))
    rows = [[cert.s_grid[i], cert.deficit_curve[i]] for i in idx]
    est = {"feasible": cert.feasible, "c1": cert.c1, "worst_s": cert.worst_s,
           "expected_c1": expected, "g_analytic_residual": gres.analytic,
           "g_fd_relative_residual": gres.relative_finite_difference}
    return Outcome(["s", "deficit"], rows,
                   {"feasible": cert.feasible, "g_identity": gres.analytic == 0.0}, est)


def run_barrier_probe(p, workers):
    bounds = FoliationBounds(rho1=-p["n"] * p["c1"], kappa=0.0)
    cert = comp.CompletenessCertificate(True, p["c1"], 0.0, np.array([0.0]), np.array([0.0]),
                                        p["n"], bounds)
    cfg = SimConfig(dt=p["dt"], horizon=p["horizon"], n_paths=p["n_paths"], seed=p["seed"])
    res = comp.explosion_probe(cert, p["C0"], p["horizon"], cfg, r0=p["r0"], sigma2=p["sigma2"])
    rows = [[t, e, s, m] for t, e, s, m in zip(res.times, res.envelope, res.sup_per_checkpoint,
                                                 res.mean_check)]
    return Outcome(["t", "envelope", "max_running_sup", "exact_mean"], rows,
                   {"finite": res.finite, "envelope": res.verdict},
                   {"max_sup": res.max_sup, "violation_fraction": res.violation_fraction})


HANDLERS = {
    "drift-table": run_drift_table,
    "dominance-test": run_dominance,
    "exit-times": run_exit_times,
    "eigen-1d": run_eigen_1d,
    "eigen-3d": run_eigen_3d,
    "mc-lambda1": run_mc_lambda1,
    "heat-compare": run_heat_compare,
    "volume-scaling": run_volume_scaling,
    "qv-check": run_qv_check,
    "lil-check": run_lil_check,
    "completeness-check": run_completeness,
    "barrier-probe": run_barrier_probe,
}


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def write_outputs(cfg, outcome, wall):
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(cfg.stem + ".csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(outcome.header)
        for row in outcome.rows:
            w.writerow([_fmt(v) for v in row])
    overall = all(outcome.verdicts.values())
    lines = [
        "[run]",
        f"subcommand = {cfg.subcommand}",
        f"claim = {CLAIMS[cfg.subcommand]}",
        f"seed = {_fmt(cfg.params.get('seed', 'none'))}",
        f"workers = {cfg.workers}",
        f"wall_time_s = {wall:.3f}",
        f"verdict = {'pass' if overall else 'fail'}",
        "",
        "[parameters]",
    ]
    lines += [f"{k} = {_fmt(v)}  # {cfg.sources.get(k, '')}" for k, v in cfg.params.items()]
    lines += ["", "[verdicts]"]
    lines += [f"{k} = {'pass' if v else 'fail'}" for k, v in outcome.verdicts.items()]
    lines += ["", "[estimates]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in outcome.estimates.items()]
    with open(cfg.stem + ".summary.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return overall


def run_experiment(cfg):
    """Run one experiment, write its artifacts and return the exit code."""
    t0 = time.perf_counter()
    outcome = HANDLERS[cfg.subcommand](cfg.params, cfg.workers)
    ok = write_outputs(cfg, outcome, time.perf_counter() - t0)
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="radialcomp", description="Radial comparison experiments.")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=CLAIMS[name])
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument("--name", default="", help="output file stem (default: subcommand)")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: $RADIALCOMP_WORKERS or CPU count)")
        for key, (_, default, helptext) in schema.items():
            sp.add_argument(f"--{key}", dest=f"key_{key}", default=None,
                            help=f"{helptext} (default: {_fmt(default)})")
    return parser


def parse_config(argv):
    args = build_parser().parse_args(argv)
    if not args.subcommand:
        raise ConfigError("missing subcommand")
    file_values = read_config_file(args.config, args.subcommand) if args.config else {}
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("key_")}
    params, sources = resolve(args.subcommand, file_values, flags)
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        raise ConfigError("--workers must be >= 1")
    return ExperimentConfig(args.subcommand, params, args.out_dir, args.name, workers, sources)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return run_experiment(cfg)
    except Exception as exc:  # solver or runtime failure
        print(f"error: {type(exc).__name__}: {exc}".splitlines()[0], file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
