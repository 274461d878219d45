"""Command-line entry point.

Subcommands
-----------
certify <config>   sample the p-condition and the growth envelopes
solve <config>     integrate and store the trajectory
verify <config>    certify, solve, run every enabled audit and the optional sweep
sweep <config>     run only the [sweep] section
report <dir>       render SVG plots and summary.txt for an artifact directory

``<config>`` is an INI file or the name of a bundled preset (``hjdecay presets``
lists them).  Exit status: 0 pass, 1 audit failure, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bounds
from .config import bundled_presets, load_config
from .errors import BudgetError, CertificationError, ConfigError, DataError, HJError, StabilityError
from .evolve import save_trajectory, solve_inviscid_lf, solve_viscous
from .field import BallSpec, Field, make_initial
from .hamiltonian import NullH, PurePower, certify, derived_envelopes
from .report import emit_report
from .sweep import EvalWindow, comparison_harness, run_vv_sweep, truncation_harness

__all__ = ["main", "run_experiment", "EXIT_PASS", "EXIT_AUDIT_FAIL", "EXIT_INPUT", "EXIT_NUMERICAL"]

EXIT_PASS, EXIT_AUDIT_FAIL, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("hjdecay")


def _certify_all(cfg, out: Path):
    """Certificates and envelope audits for every spec; returns (ok, certs, envelopes)."""
    certs, envs, records, ok = [], [], [], True
    for spec in cfg.specs:
        if isinstance(spec, NullH):
            certs.append(None)
            envs.append(None)
            records.append({"spec": "null", "certified": False, "reason": "no growth regime"})
            continue
        try:
            cert = certify(spec)
        except CertificationError as exc:
            ok = False
            certs.append(None)
            envs.append(None)
            records.append({"certified": False, "error": str(exc), "r": exc.r, "eta": exc.eta})
            continue
        env, audit = derived_envelopes(spec, cert)
        ok &= audit.ok
        certs.append(cert)
        envs.append(env)
        rec = cert.to_dict()
        rec["envelope"] = {"g_H": env.g_H, "kappa0": env.kappa0, "kappa_inf": env.kappa_inf, "audit_ok": audit.ok}
        records.append(rec)
    payload = records[0] if len(records) == 1 else records
    (out / "certificate.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    return ok, certs, envs


def _solve(cfg, phi):
    if cfg.solve.epsilon > 0:
        return solve_viscous(phi, cfg.spec, cfg.solve)
    return solve_inviscid_lf(phi, cfg.spec, cfg.solve)


def _heat_reports(traj, phi_params, tol, slack):
    box = traj.box
    k = 2.0 * np.pi / box.side_length
    amp = phi_params.get("A", phi_params.get("amplitude", 1.0))
    x = box.coords()[0]
    out = []
    for t, f in traj.snapshots:
        exact = 0.5 * amp * (1.0 + np.exp(-traj.config.epsilon * k * k * t) * np.cos(k * x))
        err = float(np.max(np.abs(f.values - exact)))
        out.append(bounds.BoundReport.upper("heat_kernel", t, err, tol, slack))
    return out


def _audit(cfg, traj, inviscid, cert, env, slack_override):
    a = cfg.audits
    slack = dict(a.slack)
    if slack_override is not None:
        slack = {k: slack_override for k in slack}
    reports = []
    spec = cfg.spec
    needs_constants = [n for n in a.enabled if n != "heat_kernel"]
    if needs_constants and cert is None:
        raise ConfigError(f"{cfg.path}: audits {', '.join(needs_constants)} need a certified Hamiltonian")
    consts = bounds.derive_constants(cert, env, traj.initial_sup, traj.box.dim) if cert is not None else None
    gap = None if cfg.derivative_spacing is None else 1.001 * cfg.derivative_spacing
    en = set(a.enabled)

    if en & {"gradx", "gradxind"}:
        reps = bounds.check_grad_decay(traj, consts, slack=slack["gradx"], t_range=a.t_range)
        if slack["gradxind"] != slack["gradx"]:
            reps = [r for r in reps if r.bound_id == "gradx"] + [
                r for r in bounds.check_grad_decay(traj, consts, slack=slack["gradxind"], t_range=a.t_range)
                if r.bound_id == "gradxind"
            ]
        reports += [r for r in reps if r.bound_id in en]
    if en & {"dudtpl", "dudtmn"} and traj.config.epsilon > 0:
        reps = bounds.check_dt_bounds(traj, consts, traj.config.epsilon, slack=slack["dudtpl"],
                                      t_range=a.t_range, max_gap=gap)
        reports += [r for r in reps if r.bound_id in en]
    if "vdt" in en:
        src = inviscid if inviscid is not None else traj
        reports += bounds.check_dt_bounds(src, consts, 0.0, slack=slack["vdt"], t_range=a.t_range, max_gap=gap)
    if "t_minus_one" in en:
        if not isinstance(spec, PurePower):
            raise ConfigError(f"{cfg.path}: the t_minus_one audit needs kind = pure_power")
        reports.append(bounds.check_dt_homogeneous(traj, a.rho, slack=slack["t_minus_one"],
                                                   window=a.t_minus_one_window, max_gap=gap))
    if "holder_t" in en:
        reports += bounds.check_time_holder(traj, consts, traj.config.epsilon, a.holder_h, a.holder_time,
                                            slack=slack["holder_t"])
    if "ball_mass" in en:
        balls = [BallSpec(a.ball_center, r) for r in a.ball_radii]
        reports += bounds.check_ball_mass(traj, balls, cert, pairs=list(a.ball_pairs), ceiling=a.ball_ceiling)
    if "heat_kernel" in en:
        if not isinstance(spec, NullH) or cfg.preset != "cosine":
            raise ConfigError(f"{cfg.path}: the heat_kernel audit needs kind = null and preset = cosine")
        reports += _heat_reports(traj, cfg.preset_params, a.heat_tolerance, slack["heat_kernel"])
    return reports


def _data(cfg, spec_tuple):
    name, params = spec_tuple
    return make_initial(name, params, cfg.box)


def _sweep(cfg, cert, out: Path):
    s = cfg.sweep
    cfg.require_solve()
    spec = cfg.spec
    if s.kind == "vanishing_viscosity":
        phi = make_initial(cfg.preset, cfg.preset_params, cfg.box)
        ref = make_initial(cfg.preset, cfg.preset_params, cfg.box.refine(s.reference_refine))
        rep = run_vv_sweep(phi, spec, cert, s.eps_list, EvalWindow(s.window_times, s.inner_fraction),
                           base_config=cfg.solve, reference_phi=ref, slope_min=s.slope_min)
    elif s.kind == "comparison":
        lo = _data(cfg, s.lo)
        hi = _data(cfg, s.hi) if s.hi is not None else Field(lo.box, lo.values + s.hi_shift)
        conf = cfg.solve
        if s.window_times:
            conf = replace(conf, snapshot_times=s.window_times, t_end=s.window_times[-1])
        rep = comparison_harness(lo, hi, spec, cert, conf)
    else:
        rep = truncation_harness({"q": s.growth_q, "s": s.growth_s}, s.n_list, spec, cert, cfg.solve,
                                 EvalWindow(s.window_times, s.inner_fraction), cfg.box, min_ratio=s.min_ratio)
    rep.write(out / "sweep")
    return rep


def run_experiment(config_path, output_dir=None, slack=None, stages=("certify", "solve", "audit", "sweep")):
    """certify -> solve -> audits -> optional sweep.  Returns ``(exit_status, artifact_dir)``.

    Artifacts are written even when audits fail.  Input errors raise
    :class:`ConfigError`; numerical failures propagate as
    :class:`StabilityError` or :class:`BudgetError` (see :func:`main`).
    """
    cfg = load_config(config_path, output_dir)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(cfg.path, out / "config.ini")
    summary = {"config": str(cfg.path), "derivative_spacing": cfg.derivative_spacing}
    ok = True
    reports = []

    cert_ok, certs, envs = _certify_all(cfg, out)
    summary["certificate_ok"] = cert_ok
    ok &= cert_ok
    cert, env = certs[0], envs[0]

    traj = None
    if "solve" in stages and (cfg.solve is not None or "audit" not in stages):
        cfg.require_solve()
        phi = make_initial(cfg.preset, cfg.preset_params, cfg.box)
        log.info("solving %s on %d^%d nodes", type(cfg.spec).__name__, cfg.box.resolution, cfg.box.dim)
        traj = _solve(cfg, phi)
        save_trajectory(traj, out / "trajectory")
        summary["steps"] = traj.steps
        inviscid = None
        if "audit" in stages and "vdt" in cfg.audits.enabled and cfg.solve.epsilon > 0:
            inviscid = solve_inviscid_lf(phi, cfg.spec, replace(cfg.solve, epsilon=0.0, flux=cfg.audits.vdt_flux))
            save_trajectory(inviscid, out / "trajectory_inviscid")
        if "audit" in stages and cfg.audits.enabled:
            reports = _audit(cfg, traj, inviscid, cert, env, slack)
            bounds.write_reports(reports, out / "bound_reports.csv", out / "bound_summary.json")

    if "sweep" in stages and cfg.sweep is not None:
        rep = _sweep(cfg, cert, out)
        summary["sweep_kind"] = rep.kind
        summary["sweep_verdict"] = rep.verdict
        ok &= rep.verdict

    n_pass = sum(r.passed for r in reports)
    checks = len(reports) + 1 + ("sweep_verdict" in summary)
    passes = n_pass + int(cert_ok) + int(summary.get("sweep_verdict", False))
    summary.update({
        "pass_count": passes,
        "fail_count": checks - passes,
        "worst_margin": min((r.margin for r in reports), default=None),
    })
    ok &= all(r.passed for r in reports)
    status = EXIT_PASS if ok else EXIT_AUDIT_FAIL
    summary["exit_status"] = status
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return status, out


def _parser():
    ap = argparse.ArgumentParser(prog="hjdecay", description="Decay estimates for viscous Hamilton-Jacobi flows.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("certify", "certify the Hamiltonian(s)"),
        ("solve", "solve and store the trajectory"),
        ("verify", "certify, solve, audit, sweep"),
        ("sweep", "run the [sweep] section"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="INI file or bundled preset name")
        p.add_argument("-o", "--output", help="artifact directory (overrides [output] dir)")
        p.add_argument("--slack", type=float, metavar="PCT", help="override every audit slack, in percent")
        p.add_argument("--no-report", action="store_true", help="skip plots")
    r = sub.add_parser("report", help="render plots for an artifact directory")
    r.add_argument("directory")
    sub.add_parser("presets", help="list bundled presets")
    return ap


_STAGES = {
    "certify": ("certify",),
    "solve": ("certify", "solve"),
    "verify": ("certify", "solve", "audit", "sweep"),
    "sweep": ("certify", "sweep"),
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "presets":
            print("\n".join(bundled_presets()))
            return EXIT_PASS
        if args.command == "report":
            try:
                written = emit_report(args.directory)
            except HJError as exc:
                print(f"input error: {exc}", file=sys.stderr)
                return EXIT_INPUT
            for path in written:
                print(path)
            return EXIT_PASS
        if args.slack is not None and args.slack < 0:
            raise ConfigError("--slack must be nonnegative")
        slack = None if args.slack is None else args.slack / 100.0
        status, out = run_experiment(args.config, args.output, slack, _STAGES[args.command])
        plottable = (out / "trajectory" / "manifest.json").exists() or (out / "sweep" / "sweep_report.json").exists()
        if not args.no_report and plottable:
            emit_report(out)
        summary = json.loads((out / "summary.json").read_text())
        print(f"{out}: {summary['pass_count']} passed, {summary['fail_count']} failed "
              f"(worst margin {summary['worst_margin']})")
        return status
    except (StabilityError, BudgetError, DataError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HJError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:  # anything unexpected is reported as a numerical failure, never as an audit verdict
        traceback.print_exc()
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
