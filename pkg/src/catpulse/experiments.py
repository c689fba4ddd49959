"""Batch experiments behind the command line.

Each experiment writes ``record.json`` (deterministic scalar summary, config
echo included verbatim) plus CSV data files into the output directory.
Wall-clock time goes to a separate ``timing.json`` so that ``record.json``
is byte-identical across repeated runs.

CSV schemas
-----------
trajectory.csv
    ``t, trace, n_cavity, n_virtual, sx[emitter1], ...`` on the accepted
    integrator steps (real parts).
wigner.csv
    ``x, p, W`` with x the outer and p the inner loop.
pe_map.csv
    ``kappa_over_g, kappa_tau, P_e, P_e_estimate, steps``.
kex_sweep.csv
    ``kappa_in_over_g, kappa_in, candidate, kappa_ex_best, ratio, F_best, F_min_at_best, evaluations``.
sweep_<i>.csv
    ``kappa_ex, fidelity`` for every objective evaluation of sweep ``i``.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version as _dist_version

import numpy as np

from .analytics import analytic_report, f_min, mode_match, pe_estimate, validity_warnings
from .config import RunConfig
from .dynamics import integrate_master
from .model import SystemParams, build_full_model, excited_projector
from .optimizer import optimize_kappa_ex
from .protocol import initial_state, simulate_cat
from .pulses import PulsePlan, four_cat_amplitudes, make_pulse_plan
from .states import EXCITED_OBSERVABLE, default_wigner_grid, excited_population_avg, save_wigner_csv, wigner, wigner_norm


def library_version() -> str:
    try:
        return _dist_version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _fmt(x) -> str:
    return repr(float(x))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _plan(cfg: RunConfig, params: SystemParams, amplitudes) -> PulsePlan:
    p = cfg.pulse
    opts = {k: p[k] for k in ("t0_over_tau", "T_over_tau", "grid") if k in p}
    if "tau" in p:
        return make_pulse_plan(params, amplitudes, tau=p["tau"], **opts)
    return make_pulse_plan(params, amplitudes, kappa_tau=p["kappa_tau"], **opts)


def _amplitudes(cfg: RunConfig, target: str):
    if target == "four-cat":
        return four_cat_amplitudes(cfg.pulse["beta"])
    return [cfg.pulse["alpha"]] * int(cfg.system.get("n_emitters", 1))


def _sim_options(cfg: RunConfig) -> dict:
    n = cfg.numerics
    return {"n_cavity": n.get("n_cavity"), "n_virtual": n.get("n_virtual"),
            "long_pulse": n.get("long_pulse", False), "tol": cfg.tolerances}


def write_trajectory_csv(path, traj):
    names = ["trace"] + [k for k in traj.observables if k != "trace"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        for i, t in enumerate(traj.times):
            w.writerow([_fmt(t)] + [_fmt(np.real(traj.observables[k][i])) for k in names])


def _wigner_grid(cfg: RunConfig, amplitude: float):
    w = cfg.wigner
    x_ref, _ = default_wigner_grid(amplitude, 2)
    x_min, x_max = w.get("x_min", x_ref[0]), w.get("x_max", x_ref[-1])
    bounds = (x_min, x_max, w.get("p_min", x_min), w.get("p_max", x_max))
    return default_wigner_grid(amplitude, w.get("points", 121), bounds)


def _cat_experiment(cfg: RunConfig, out_dir: str, target: str, with_wigner: bool) -> dict:
    params = cfg.system_params(**({"n_emitters": 2} if target == "four-cat" else {}))
    amps = _amplitudes(cfg, target)
    plan = _plan(cfg, params, amps)
    amp = plan.total_amplitude
    report = analytic_report(params, amp, plan.envelope.tau, lam=plan.drives[0].lam, T=plan.envelope.T,
                             variant=target, warn=False)
    run = simulate_cat(params, plan, target, **_sim_options(cfg))
    files = []
    if cfg.output.get("trajectory", True):
        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), run.trajectory)
        files.append("trajectory.csv")
    result = {"summary": run.summary(), "analytic": report.to_dict(),
              "diagnostics": _clean_diag(run.trajectory.diagnostics)}
    if with_wigner:
        x, p = _wigner_grid(cfg, amp)
        W = wigner(run.optical_state, x, p)
        save_wigner_csv(os.path.join(out_dir, "wigner.csv"), x, p, W)
        files.append("wigner.csv")
        result["wigner"] = {"min": float(W.min()), "max": float(W.max()), "integral": wigner_norm(W, x, p),
                            "points": int(x.size)}
    result["files"] = files
    return result


def _clean_diag(diag: dict) -> dict:
    out = {}
    for k, v in diag.items():
        if isinstance(v, float) and not np.isfinite(v):
            v = None
        out[k] = v
    return out


def _pe_cell(cfg: RunConfig, kappa_over_g: float, kappa_tau: float, n_cavity: int | None) -> dict:
    base = cfg.system_params(kappa_ex=1.0)
    kappa = kappa_over_g * base.g
    params = base.replace(kappa_ex=kappa - base.kappa_in)
    plan = make_pulse_plan(params, [cfg.pulse["alpha"]], kappa_tau=kappa_tau,
                           **{k: cfg.pulse[k] for k in ("t0_over_tau", "T_over_tau", "grid") if k in cfg.pulse})
    model = build_full_model(params, plan.drives, n_cavity=n_cavity)
    traj = integrate_master(model, initial_state(model), (0.0, plan.envelope.T), cfg.tolerances,
                            observables={EXCITED_OBSERVABLE: excited_projector(model)})
    tau = plan.envelope.tau
    return {"kappa_over_g": kappa_over_g, "kappa_tau": kappa_tau,
            "P_e": excited_population_avg(traj, params, tau),
            "P_e_estimate": pe_estimate(abs(cfg.pulse["alpha"]), params, tau),
            "steps": traj.diagnostics["steps"],
            "trace_drift": traj.diagnostics["trace_drift"],
            "min_eigenvalue": traj.diagnostics["min_eigenvalue"]}


def _pe_map(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    cells = [(k, kt) for k in cfg.pe_map["kappa_over_g"] for kt in cfg.pe_map["kappa_tau"]]
    n_c = cfg.pe_map.get("n_cavity")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: _pe_cell(cfg, c[0], c[1], n_c), cells))
    else:
        rows = [_pe_cell(cfg, k, kt, n_c) for k, kt in cells]
    with open(os.path.join(out_dir, "pe_map.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa_over_g", "kappa_tau", "P_e", "P_e_estimate", "steps"])
        for r in rows:
            w.writerow([_fmt(r["kappa_over_g"]), _fmt(r["kappa_tau"]), _fmt(r["P_e"]), _fmt(r["P_e_estimate"]),
                        r["steps"]])
    return {"cells": rows, "files": ["pe_map.csv"]}


def _kex_sweep(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    target = cfg.sweep.get("target", "two-cat")
    lo_f, hi_f = cfg.sweep.get("bracket_over_kappa_in", [0.1, 1e4])
    rel_tol = cfg.sweep.get("rel_tol", 0.01)
    rows, files = [], ["kex_sweep.csv"]
    for i, x in enumerate(cfg.sweep["kappa_in_over_g"]):
        base = cfg.system_params(kappa_ex=1.0, kappa_in=x * cfg.system["g"],
                                 **({"n_emitters": 2} if target == "four-cat" else {}))
        plan = _plan(cfg, base, _amplitudes(cfg, target))
        res = optimize_kappa_ex(base, plan, target, bracket=(lo_f * base.kappa_in, hi_f * base.kappa_in),
                                rel_tol=rel_tol, threads=threads, **_sim_options(cfg))
        res.to_csv(os.path.join(out_dir, f"sweep_{i}.csv"))
        files.append(f"sweep_{i}.csv")
        best = base.replace(kappa_ex=res.best_kappa_ex)
        fmin = f_min(plan.total_amplitude, mode_match(best)) if target == "two-cat" else None
        rows.append({"kappa_in_over_g": x, "kappa_in": base.kappa_in, "candidate": res.candidate,
                     "kappa_ex_best": res.best_kappa_ex, "ratio": res.ratio, "F_best": res.best_fidelity,
                     "F_min_at_best": fmin, "evaluations": res.n_evaluations, "warnings": res.warnings,
                     "at_bracket_edge": res.at_bracket_edge})
    with open(os.path.join(out_dir, "kex_sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa_in_over_g", "kappa_in", "candidate", "kappa_ex_best", "ratio", "F_best",
                    "F_min_at_best", "evaluations"])
        for r in rows:
            w.writerow([_fmt(r["kappa_in_over_g"]), _fmt(r["kappa_in"]), _fmt(r["candidate"]),
                        _fmt(r["kappa_ex_best"]), _fmt(r["ratio"]), _fmt(r["F_best"]),
                        "" if r["F_min_at_best"] is None else _fmt(r["F_min_at_best"]), r["evaluations"]])
    return {"target": target, "rows": rows, "files": files}


def config_warnings(cfg: RunConfig) -> list[str]:
    """Physics warnings for a parsed configuration (no simulation)."""
    msgs = []
    if cfg.kind == "pe-map":
        base = cfg.system_params(kappa_ex=1.0)
        for k in cfg.pe_map["kappa_over_g"]:
            params = base.replace(kappa_ex=k * base.g - base.kappa_in)
            for kt in cfg.pe_map["kappa_tau"]:
                msgs += [f"kappa/g={k:g}, kappa*tau={kt:g}: {m}" for m in validity_warnings(params, kt / params.kappa)]
        return msgs
    target = cfg.sweep.get("target") if cfg.kind == "kex-sweep" else cfg.wigner.get("target")
    target = "four-cat" if cfg.kind == "four-cat" or target == "four-cat" else "two-cat"
    extra = {"n_emitters": 2} if target == "four-cat" else {}
    if cfg.kind == "kex-sweep":
        for x in cfg.sweep["kappa_in_over_g"]:
            base = cfg.system_params(kappa_ex=1.0, kappa_in=x * cfg.system["g"], **extra)
            from .analytics import optimal_kappa_ex

            params = base.replace(kappa_ex=optimal_kappa_ex(base, target))
            plan = _plan(cfg, params, _amplitudes(cfg, target))
            msgs += [f"kappa_in/g={x:g}: {m}" for m in validity_warnings(params, plan.envelope.tau)]
        return msgs
    params = cfg.system_params(**extra)
    plan = _plan(cfg, params, _amplitudes(cfg, target))
    return validity_warnings(params, plan.envelope.tau)


def run_experiment(cfg: RunConfig, out_dir: str, threads: int = 1) -> dict:
    """Run ``cfg`` and write its files into ``out_dir``; returns the record."""
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    record = {"kind": cfg.kind, "version": library_version(), "config": cfg.source,
              "warnings": config_warnings(cfg), "status": "ok"}
    if cfg.kind == "single-cat":
        record["result"] = _cat_experiment(cfg, out_dir, "two-cat", bool(cfg.wigner))
    elif cfg.kind == "four-cat":
        record["result"] = _cat_experiment(cfg, out_dir, "four-cat", bool(cfg.wigner))
    elif cfg.kind == "wigner":
        record["result"] = _cat_experiment(cfg, out_dir, cfg.wigner.get("target", "two-cat"), True)
    elif cfg.kind == "pe-map":
        record["result"] = _pe_map(cfg, out_dir, threads)
    else:
        record["result"] = _kex_sweep(cfg, out_dir, threads)
    write_json(os.path.join(out_dir, "record.json"), record)
    write_json(os.path.join(out_dir, "timing.json"), {"wall_clock_seconds": time.perf_counter() - start,
                                                       "threads": threads})
    return record
