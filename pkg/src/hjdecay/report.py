"""Static SVG plots and a text summary for an artifact directory.

Output is byte-identical for identical inputs: the SVG hash salt is fixed and
no creation date is embedded.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bounds import derive_constants, read_reports, time_derivatives  # noqa: E402
from .errors import DataError, HJError  # noqa: E402
from .evolve import load_trajectory  # noqa: E402
from .field import grad_mag_central  # noqa: E402
from .hamiltonian import NullH, certify, derived_envelopes  # noqa: E402

__all__ = ["emit_report"]

_RC = {"svg.hashsalt": "hjdecay", "svg.fonttype": "path", "font.size": 9}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _axes(ax, xs, ys):
    pos = [np.asarray(y)[np.asarray(y) > 0] for y in ys]
    if len(xs) and np.min(xs) > 0 and all(len(p) for p in pos):
        ax.set_xscale("log")
        ax.set_yscale("log")


def _constants(traj):
    if isinstance(traj.spec, NullH):
        return None
    try:
        cert = certify(traj.spec)
        env, _ = derived_envelopes(traj.spec, cert)
        return derive_constants(cert, env, traj.initial_sup, traj.box.dim)
    except HJError:
        return None


def _grad_plot(traj, consts, path):
    t = traj.times
    g = np.array([float(np.max(grad_mag_central(f).values)) for f in traj.fields])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(t, g, "o-", ms=3, label="sup |grad v|")
    curves = [g]
    if consts is not None:
        b = consts.gradx_bound(t)
        ax.plot(t, b, "--", label="gradx bound")
        curves.append(b)
        if consts.p > 1:
            w = []
            for f in traj.fields:
                v = np.where(f.values < 1e-14, 0.0, np.maximum(f.values, 0.0)) ** ((consts.p - 1) / consts.p)
                w.append(float(np.max(grad_mag_central(f.with_values(v)).values)))
            ax.plot(t, w, "s-", ms=3, label="sup |grad v^((p-1)/p)|")
            ax.plot(t, consts.gradxind_bound(t), ":", label="gradxind bound")
            curves.append(np.asarray(w))
        if np.all(t > 0):
            ref = b[0] * (t / t[0]) ** (-1.0 / consts.p)
            ax.plot(t, ref, color="0.6", lw=0.8, label=f"slope -1/p = {-1.0 / consts.p:g}")
    _axes(ax, t, curves)
    ax.set_xlabel("t")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def _dt_plot(trajs, consts, path, max_gap):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, traj in trajs:
        try:
            der = time_derivatives(traj, max_gap=max_gap)
        except HJError:
            continue
        if not der:
            der = time_derivatives(traj)
        tm = np.array([d[0] for d in der])
        ax.plot(tm, [float(np.max(d[1])) for d in der], "^-", ms=3, label=f"{label}: sup dv/dt")
        ax.plot(tm, [float(np.min(d[1])) for d in der], "v-", ms=3, label=f"{label}: inf dv/dt")
        if consts is not None:
            eps = traj.config.epsilon
            low = consts.vdt_lower_bound(tm)
            if eps > 0:
                visc = consts.dudt_viscous_term(tm, eps)
                ax.plot(tm, visc, "--", label="dudtpl bound")
                ax.plot(tm, low - visc, "--", label="dudtmn bound")
            else:
                ax.plot(tm, low, ":", label="vdt lower bound")
                ax.axhline(0.0, color="0.5", lw=0.8)
    if len(ax.lines) and all(t > 0 for line in ax.lines for t in np.atleast_1d(line.get_xdata())):
        ax.set_xscale("log")
        ax.set_yscale("symlog", linthresh=1e-3)
    ax.set_xlabel("t")
    ax.legend(fontsize=6)
    fig.tight_layout()
    return _save(fig, path)


def _sweep_plot(report, path):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    d = report.get("details", {})
    if report["kind"] == "vanishing_viscosity":
        eps = np.array(d["eps_list"])
        dist = np.array(d["distance_to_reference"])
        ax.plot(eps, dist, "o-", label="sup distance to reference")
        if "distance_to_hopf_lax" in d:
            ax.plot(eps, d["distance_to_hopf_lax"][: len(eps)], "s--", label="sup distance to Hopf-Lax")
        rf = report.get("rate_fit")
        if rf:
            ax.plot(eps, np.exp(rf["intercept"]) * eps ** rf["slope"], ":", color="0.4")
            ax.annotate(f"fitted slope {rf['slope']:.3f}", xy=(0.05, 0.9), xycoords="axes fraction")
        _axes(ax, eps, [dist])
        ax.set_xlabel("epsilon")
    elif report["kind"] == "truncation":
        lv = np.array(d["levels"][:-1])
        dist = np.array(d["consecutive_distances"])
        ax.plot(lv, np.maximum(dist, 1e-300), "o-", label="distance between consecutive levels")
        if np.all(dist > 0):
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("truncation level n")
    else:
        gaps = d.get("min_gap", [])
        ax.plot(np.arange(len(gaps)), gaps, "o-", label="min(hi - lo) per snapshot")
        ax.set_xlabel("snapshot")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def _summary_text(root: Path) -> str:
    lines = []
    summary = root / "summary.json"
    if summary.exists():
        s = json.loads(summary.read_text())
        lines.append("summary")
        for k in sorted(s):
            if not isinstance(s[k], (dict, list)):
                lines.append(f"  {k:<20} {s[k]}")
        lines.append("")
    csv_path = root / "bound_reports.csv"
    if csv_path.exists():
        reps = read_reports(csv_path)
        lines.append(f"{'bound_id':<14}{'checks':>8}{'pass':>8}{'worst margin':>16}{'fitted C':>14}")
        for bid in sorted({r.bound_id for r in reps}):
            rs = [r for r in reps if r.bound_id == bid]
            fc = [r.fitted_constant for r in rs if r.fitted_constant is not None]
            fcs = f"{max(fc):.4g}" if fc else "-"
            lines.append(f"{bid:<14}{len(rs):>8}{sum(r.passed for r in rs):>8}{min(r.margin for r in rs):>16.4g}{fcs:>14}")
        lines.append("")
    sweep = root / "sweep" / "sweep_report.json"
    if sweep.exists():
        rep = json.loads(sweep.read_text())
        lines.append(f"sweep {rep['kind']}: verdict {'pass' if rep['verdict'] else 'fail'}")
        if rep.get("rate_fit"):
            lines.append(f"  fitted slope {rep['rate_fit']['slope']:.4f}")
    return "\n".join(lines) + "\n"


def emit_report(artifact_dir) -> list:
    """Render plots and ``summary.txt`` into ``artifact_dir``; returns the paths written.

    Raises
    ------
    DataError
        Neither a trajectory manifest nor a sweep report is present.
    """
    root = Path(artifact_dir)
    traj_dir = root / "trajectory"
    if not (traj_dir / "manifest.json").exists() and (root / "manifest.json").exists():
        traj_dir = root
    sweep = root / "sweep" / "sweep_report.json"
    has_traj = (traj_dir / "manifest.json").exists()
    if not has_traj and not sweep.exists():
        raise DataError(f"{root}: no manifest.json or sweep report found")

    written = []
    with plt.rc_context(_RC):
        if has_traj:
            traj = load_trajectory(traj_dir)
            consts = _constants(traj)
            written.append(_grad_plot(traj, consts, root / "gradient_decay.svg"))
            trajs = [("viscous" if traj.config.epsilon > 0 else "inviscid", traj)]
            inv = root / "trajectory_inviscid"
            if (inv / "manifest.json").exists():
                trajs.append(("inviscid", load_trajectory(inv)))
            spacing = None
            summary = root / "summary.json"
            if summary.exists():
                spacing = json.loads(summary.read_text()).get("derivative_spacing")
            written.append(_dt_plot(trajs, consts, root / "time_derivative.svg",
                                    None if spacing is None else 1.001 * spacing))
        if sweep.exists():
            written.append(_sweep_plot(json.loads(sweep.read_text()), root / "sweep.svg"))
    txt = root / "summary.txt"
    txt.write_text(_summary_text(root))
    written.append(txt)
    return written
