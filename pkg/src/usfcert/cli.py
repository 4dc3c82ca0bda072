"""Command-line front end.

    usfcert <command> [--config PATH] [--seed INT] [--out DIR] [--threads INT]

Exit codes: 0 ok/certified, 2 refuted/violated, 3 inconclusive, 1 usage or
runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import certify, comparison, config as cfgmod, moments, sdde, usf
from .markov import sample_path
from . import rng as rngmod
from .signals import from_dict

OK, FAILED, REFUTED, INCONCLUSIVE = 0, 1, 2, 3


def _r(x):
    """17-significant-digit round-trip float text."""
    return repr(float(x))


def _write_json(out, name, obj):
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _emit(obj):
    print(json.dumps(obj, indent=2, default=_json_default))


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


# --- commands ---------------------------------------------------------------------

def cmd_check_usf(cfg, args):
    mu = from_dict(cfg.usf.mu)
    res = usf.check_usf(mu, cfg.usf.horizon, cfg.usf.grid_step)
    out = res.to_json()
    _write_json(args.out, "usf.json", out)
    _emit(out)
    return {"certified": OK, "refuted": REFUTED}.get(res.status, INCONCLUSIVE)


def cmd_overshoot(cfg, args):
    mu = from_dict(cfg.usf.mu)
    phi = usf.overshoot(mu, cfg.usf.T, cfg.usf.horizon, cfg.usf.grid_step)
    out = {"T": cfg.usf.T, "overshoot": phi}
    _write_json(args.out, "overshoot.json", out)
    _emit(out)
    return OK


def cmd_ucs(cfg, args):
    mu = from_dict(cfg.usf.mu)
    inside = usf.ucs_contains(mu, cfg.usf.T, cfg.usf.horizon, cfg.usf.grid_step)
    out = {"T": cfg.usf.T, "in_ucs": bool(inside)}
    _write_json(args.out, "ucs.json", out)
    _emit(out)
    return OK if inside else REFUTED


def cmd_gain_check(cfg, args):
    u = cfg.usf
    mu = from_dict(u.mu)
    try:
        ok = usf.check_gain_condition(usf.RazumikhinGainParams(u.q, u.rho, u.T), mu,
                                      u.horizon, u.grid_step)
        out = {"q": u.q, "rho": u.rho, "T": u.T,
               "overshoot": usf.overshoot(mu, u.T, u.horizon, u.grid_step), "holds": ok}
    except usf.UcsPreconditionError as exc:
        ok = False
        out = {"q": u.q, "rho": u.rho, "T": u.T, "holds": False, "reason": str(exc)}
    _write_json(args.out, "gain.json", out)
    _emit(out)
    return OK if ok else REFUTED


def _model_sim(cfg, args):
    model = cfg.model.build()
    sim = cfg.sim.build(args.seed if args.seed is not None else cfg.seed)
    return model, sim


def cmd_simulate(cfg, args):
    model, sim = _model_sim(cfg, args)
    sim.validate(model)
    path = sample_path(model.gamma, sim.t_span[0], sim.t_span[1] + sim.dt, sim.initial_regime,
                       rngmod.stream(sim.master_seed, 0, rngmod.REGIME))
    tr = sdde.simulate(model, sim, path, index=0)
    tr.write_csv(os.path.join(args.out, "trajectory.csv"))
    path.write_csv(os.path.join(args.out, "regimes.csv"))
    out = {"max_abs": _clean(tr.max_abs), "nan_flag": tr.nan_flag,
           "truncation_time": tr.truncation_time, "n_substeps": tr.n_substeps}
    _write_json(args.out, "simulate.json", out)
    _emit(out)
    return OK


def _ensemble(cfg, args):
    model, sim = _model_sim(cfg, args)
    threads = args.threads or cfg.ensemble.threads
    return model, sim, moments.run_ensemble(model, sim, cfg.ensemble.N, cfg.ensemble.p,
                                            threads=threads)


def cmd_moments(cfg, args):
    _, _, est = _ensemble(cfg, args)
    est.write_csv(os.path.join(args.out, "moments.csv"))
    out = {"N": est.N, "p": est.p, "n_nan": est.n_nan, "unreliable": est.unreliable,
           "heavy_tails": est.heavy_tails, "final_moment": float(est.mean[-1]),
           "final_ci_half": float(est.ci_half[-1])}
    _write_json(args.out, "moments.json", out)
    _emit(out)
    return OK


def cmd_fit_decay(cfg, args):
    _, _, est = _ensemble(cfg, args)
    est.write_csv(os.path.join(args.out, "moments.csv"))
    fit = moments.fit_decay(est, cfg.fit.window)
    out = dataclasses.asdict(fit)
    _write_json(args.out, "fit.json", out)
    _emit(out)
    return OK


def _iss_rows_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("level,steady,ci_half,settled,trend_z\n")
        for r in rows:
            fh.write(f"{_r(r.level)},{_r(r.steady)},{_r(r.ci_half)},{str(r.settled).lower()},"
                     f"{_r(r.trend_z)}\n")


def cmd_iss_probe(cfg, args):
    model, sim = _model_sim(cfg, args)
    rows = moments.iss_gain_probe(model, sim, cfg.ensemble.input_levels, cfg.ensemble.p,
                                  cfg.ensemble.N, threads=args.threads or cfg.ensemble.threads)
    _iss_rows_csv(os.path.join(args.out, "iss.csv"), rows)
    ok = moments.table_nondecreasing(rows) and all(r.settled for r in rows)
    out = {"rows": [dataclasses.asdict(r) for r in rows],
           "nondecreasing": moments.table_nondecreasing(rows)}
    _write_json(args.out, "iss.json", out)
    _emit(out)
    return OK if ok else REFUTED


def cmd_monitor(cfg, args):
    if not cfg.monitors:
        raise ValueError("config has no monitors")
    model, sim, est = _ensemble(cfg, args)
    reports = []
    for mon in cfg.monitors:
        mu = from_dict(mon.mu)
        if mon.kind == "razumikhin":
            spec = certify.LyapunovSpec(tuple(mon.c))
            rep = certify.razumikhin_monitor(est.times, spec.expected(est.mean), mu, mon.q,
                                             model.tau, u=sim.input, varpi=mon.varpi,
                                             ci=spec.expected(est.ci_half), budget=mon.budget,
                                             rho=mon.rho, T=mon.T)
        else:
            rep = certify.krasovskii_monitor(est.times, est.mean, mon.c[0], mon.w, model.tau, mu,
                                             u=sim.input, variant=mon.variant, varpi=mon.varpi,
                                             varpi1=mon.varpi1, varpi2=mon.varpi2,
                                             ci=est.ci_half, budget=mon.budget)
        reports.append(rep.summary())
    _write_json(args.out, "monitor.json", reports)
    _emit(reports)
    return OK if all(r["verdict"] == "consistent" for r in reports) else REFUTED


def example1_report(c, e, N, horizon, tau=0.5, dt=1e-3, seed=0, threads=1, q_step=1e-3,
                    q_max=50.0, record_every=10):
    thr = usf.example1_threshold(c)
    q_grid = 1.0 + q_step * np.arange(1, int(round((q_max - 1.0) / q_step)) + 1)
    adm = usf.example1_admissible_q(c, e, q_grid)
    certified = adm.size > 0
    report = {"c": c, "e": e, "threshold": thr, "classical_condition": e < 1.0,
              "usf_condition": e < thr, "certified": bool(certified)}
    if certified:
        one, phi = usf.example1_conditions(adm, c, e)
        margin = np.minimum(-one, np.log(adm) - phi)
        q = float(adm[int(np.argmax(margin))])
        report.update(q=q, q_range=[float(adm[0]), float(adm[-1])],
                      period_integral=float(usf.example1_conditions(q, c, e)[0]),
                      overshoot=float(usf.example1_conditions(q, c, e)[1]))
    if N > 0:
        model = sdde.builtin_example1(c, e, tau)
        sim = sdde.SimConfig(dt, (0.0, float(horizon)), 1.0, None, seed, 0, record_every)
        est = moments.run_ensemble(model, sim, N, 2.0, threads=threads)
        report["unreliable"] = est.unreliable
        try:
            fit = moments.fit_decay(est)
            report["decay"] = dataclasses.asdict(fit)
            report["decay_observed"] = bool(fit.alpha_ci[0] > 0)
        except ValueError as exc:
            report["decay"] = None
            report["decay_observed"] = False
            report["fit_error"] = str(exc)
        report["_estimate"] = est
    return report


def cmd_example1(cfg, args):
    ex = cfg.example1
    c = args.c if args.c is not None else ex.c
    e = args.e if args.e is not None else ex.e
    N = args.N if args.N is not None else ex.N
    horizon = args.horizon if args.horizon is not None else ex.horizon
    rep = example1_report(c, e, N, horizon, ex.tau, ex.dt, _seed(cfg, args),
                          args.threads or cfg.ensemble.threads, ex.q_step, ex.q_max)
    est = rep.pop("_estimate", None)
    if est is not None:
        est.write_csv(os.path.join(args.out, "example1_moments.csv"))
    with open(os.path.join(args.out, "example1_verdicts.csv"), "w") as fh:
        fh.write("condition,holds\n")
        fh.write(f"classical e<1,{str(rep['classical_condition']).lower()}\n")
        fh.write(f"e<1/((1-c)exp(c)),{str(rep['usf_condition']).lower()}\n")
        if "decay_observed" in rep:
            fh.write(f"decay CI excludes 0,{str(rep['decay_observed']).lower()}\n")
    _write_json(args.out, "example1.json", rep)
    _emit(rep)
    if not rep["certified"]:
        return INCONCLUSIVE
    if "decay_observed" in rep and not rep["decay_observed"]:
        return REFUTED
    return OK


def example2_report(lam, l, N, horizon, u_levels, tau=0.5, dt=1e-3, seed=0, threads=1,
                    k_rule="printed", record_every=20):
    k = certify.example2_k_condition(lam, l, k_rule)
    if k is None:
        return {"lambda": lam, "l": l, "k": None, "k_rule": k_rule}
    q = math.exp(2.0 * lam * math.pi)
    mu = usf.example2_mu(lam, l, k, q)
    T = 2.0 * math.pi
    scan = max(horizon, 4 * T)
    in_ucs = usf.ucs_contains(mu, T, scan)
    sup_w = float(usf.sup_window_integral(mu, T, scan, 1e-3))
    phi = usf.overshoot(mu, T, scan)
    rep = {"lambda": lam, "l": l, "k": k, "k_rule": k_rule,
           "k_window_rule": certify.example2_k_condition(lam, l, "window"),
           "q": q, "T": T, "in_ucs": bool(in_ucs), "sup_window_integral": sup_w,
           "overshoot": phi, "gain_holds": bool(in_ucs and q > math.exp(phi))}
    diag = certify.restrictive_diagnostics(mu, q, tau, [50.0, 100.0, 200.0])
    rep["diagnostics"] = diag.to_dict()
    if N > 0:
        model = sdde.builtin_example2(lam, l, k, tau)
        sim = sdde.SimConfig(dt, (0.0, float(horizon)), 1.0, None, seed, 0, record_every)
        rows = moments.iss_gain_probe(model, sim, u_levels, 2.0, N, threads)
        rep["iss"] = [dataclasses.asdict(r) for r in rows]
        rep["iss_nondecreasing"] = moments.table_nondecreasing(rows)
        rep["_rows"] = rows
    return rep


def cmd_example2(cfg, args):
    ex = cfg.example2
    lam = args.lam if args.lam is not None else ex.lam
    l = args.l if args.l is not None else ex.l
    N = args.N if args.N is not None else ex.N
    horizon = args.horizon if args.horizon is not None else ex.horizon
    levels = args.u_levels if args.u_levels is not None else ex.u_levels
    rule = args.k_rule or ex.k_rule
    rep = example2_report(lam, l, N, horizon, levels, ex.tau, ex.dt, _seed(cfg, args),
                          args.threads or cfg.ensemble.threads, rule)
    rows = rep.pop("_rows", None)
    if rows is not None:
        _iss_rows_csv(os.path.join(args.out, "example2_iss.csv"), rows)
    _write_json(args.out, "example2.json", rep)
    _emit(rep)
    if rep["k"] is None:
        return INCONCLUSIVE
    ok = rep["in_ucs"] and rep["gain_holds"] and rep.get("iss_nondecreasing", True)
    return OK if ok else REFUTED


def cmd_comparison_oracle(cfg, args):
    cs = cfg.comparison
    inst = comparison.ComparisonInstance(from_dict(cs.mu), from_dict(cs.pi), from_dict(cs.psi),
                                         cs.y0, tuple(cs.t_span))
    times, y = comparison.oracle_trajectory(inst, cs.dt)
    gron = comparison.gronwall_bound_curve(inst, times, y[0])
    tr, raz = comparison.razumikhin_bound_curve(inst, cs.T, times, y)
    w = times.size - tr.size
    tol = 10 * cs.dt
    raz_full = np.concatenate([np.full(w, np.nan), raz])
    with open(os.path.join(args.out, "comparison.csv"), "w") as fh:
        fh.write("t,y,gronwall,razumikhin,bound_holds\n")
        all_ok = True
        for i, t in enumerate(times):
            ok = y[i] <= raz_full[i] + tol * max(1.0, abs(raz_full[i])) if i >= w else True
            all_ok &= bool(ok)
            fh.write(f"{_r(t)},{_r(y[i])},{_r(gron[i])},{_r(raz_full[i])},{str(bool(ok)).lower()}\n")
    out = {"points": int(times.size), "bound_holds_everywhere": all_ok,
           "max_excess": float(np.max(y[w:] - raz))}
    _write_json(args.out, "comparison.json", out)
    _emit(out)
    return OK if all_ok else REFUTED


def cmd_diagnostics(cfg, args):
    u = cfg.usf
    rep = certify.restrictive_diagnostics(from_dict(u.mu), u.q_prior, u.tau, u.horizons)
    out = rep.to_dict()
    _write_json(args.out, "diagnostics.json", out)
    _emit(out)
    return OK


COMMANDS = {
    "check-usf": cmd_check_usf,
    "overshoot": cmd_overshoot,
    "ucs": cmd_ucs,
    "gain-check": cmd_gain_check,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "fit-decay": cmd_fit_decay,
    "iss-probe": cmd_iss_probe,
    "monitor": cmd_monitor,
    "example1": cmd_example1,
    "example2": cmd_example2,
    "comparison-oracle": cmd_comparison_oracle,
    "diagnostics": cmd_diagnostics,
}


def _seed(cfg, args):
    return args.seed if args.seed is not None else cfg.seed


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, help="ensemble worker threads")
    parser = argparse.ArgumentParser(prog="usfcert", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "example1":
            sp.add_argument("--c", type=float)
            sp.add_argument("--e", type=float)
            sp.add_argument("--N", type=int)
            sp.add_argument("--horizon", type=float)
        elif name == "example2":
            sp.add_argument("--lam", type=float)
            sp.add_argument("--l", type=float)
            sp.add_argument("--N", type=int)
            sp.add_argument("--horizon", type=float)
            sp.add_argument("--u-levels", type=float, nargs="+")
            sp.add_argument("--k-rule", choices=["printed", "window"])
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return FAILED if exc.code else OK
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
        args.out = args.out or cfg.output.dir
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - report and map to the error exit code
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
