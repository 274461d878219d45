"""Multi-run experiments: vanishing viscosity, order preservation, truncation.

Each harness returns a :class:`SweepReport` whose ``distances`` matrix holds
pairwise sup distances over an evaluation window (a set of times and the inner
part of the box).  Solves inside a sweep are independent; set the environment
variable ``HJDECAY_WORKERS`` to an integer > 1 to run them in a process pool.
Results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bounds import check_grad_decay, derive_constants
from .errors import ConfigError, DomainError, PreconditionError, ShapeError, UnsupportedRegimeError
from .evolve import SolveConfig, Trajectory, gradient_bound, hopf_lax_oracle, solve_inviscid_lf, solve_viscous
from .field import Box, Field, make_initial
from .hamiltonian import NullH, PCertificate, PurePower, derived_envelopes, regime_exponent, speed_bound

__all__ = [
    "EvalWindow",
    "SweepReport",
    "run_vv_sweep",
    "comparison_harness",
    "truncation_harness",
    "worker_count",
]

WORKERS_ENV = "HJDECAY_WORKERS"


@dataclass(frozen=True)
class EvalWindow:
    """Times bounded away from 0 and the sub-box ``|x_d| <= inner_fraction * L/2``."""

    times: tuple
    inner_fraction: float = 0.5

    def __post_init__(self):
        times = tuple(sorted(float(t) for t in self.times))
        object.__setattr__(self, "times", times)
        if not times or times[0] <= 0:
            raise DomainError("window times must be positive")
        if not 0 < self.inner_fraction < 1:
            raise DomainError("inner_fraction must lie in (0, 1) so the sub-box is strictly interior")

    def mask(self, box: Box) -> np.ndarray:
        half = self.inner_fraction * box.side_length / 2.0
        m = np.ones(box.shape, dtype=bool)
        for x in box.coords():
            m &= np.abs(x) <= half + 1e-12
        return m

    def distance(self, a: Trajectory, b: Trajectory) -> float:
        """Sup of ``|a - b|`` over window times and the inner sub-box."""
        m = self.mask(a.box)
        return max(float(np.max(np.abs(a.at(t).values[m] - b.at(t).values[m]))) for t in self.times)


@dataclass
class SweepReport:
    kind: str
    runs: list
    distances: np.ndarray
    rate_fit: tuple | None
    verdict: bool
    details: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in ("vanishing_viscosity", "comparison", "truncation"):
            raise DomainError(f"unknown sweep kind {self.kind!r}")
        d = np.asarray(self.distances, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or np.any(d < 0) or not np.allclose(d, d.T, rtol=0, atol=0):
            raise ShapeError("distances must be a symmetric nonnegative square matrix")
        if self.rate_fit is not None and self.kind != "vanishing_viscosity":
            raise DomainError("rate_fit only applies to vanishing-viscosity sweeps")
        self.distances = d

    def to_dict(self) -> dict:
        rf = None if self.rate_fit is None else dict(zip(("slope", "intercept", "residual"), self.rate_fit))
        return {
            "kind": self.kind,
            "runs": self.runs,
            "distances": self.distances.tolist(),
            "rate_fit": rf,
            "verdict": bool(self.verdict),
            "details": self.details,
        }

    def write(self, directory) -> Path:
        """``sweep_report.json`` plus ``distances.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "sweep_report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        labels = [r["label"] for r in self.runs]
        with open(d / "distances.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run"] + labels)
            for lab, row in zip(labels, self.distances):
                w.writerow([lab] + [repr(float(x)) for x in row])
        return d


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    return max(1, n)


def _solve_job(job):
    phi, spec, config, alpha = job
    if config.epsilon > 0:
        return solve_viscous(phi, spec, config, alpha=alpha)
    return solve_inviscid_lf(phi, spec, config, alpha=alpha)


def _run_all(jobs):
    n = min(worker_count(), len(jobs))
    if n <= 1:
        return [_solve_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_solve_job, jobs))


def _manifest(label, traj: Trajectory, **extra) -> dict:
    box = traj.box
    d = {
        "label": label,
        "epsilon": traj.config.epsilon,
        "eta": traj.config.eta,
        "resolution": box.resolution,
        "dim": box.dim,
        "side_length": box.side_length,
        "times": [float(t) for t in traj.times],
        "sup_norm": traj.initial_sup,
        "steps": traj.steps,
    }
    d.update(extra)
    return d


def _pairwise(trajs, window: EvalWindow) -> np.ndarray:
    n = len(trajs)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = window.distance(trajs[i], trajs[j])
    return out


def _window_config(base: SolveConfig | None, window: EvalWindow, epsilon: float) -> SolveConfig:
    if base is None:
        return SolveConfig(epsilon=epsilon, t_end=window.times[-1], snapshot_times=window.times)
    return replace(base, epsilon=epsilon, t_end=window.times[-1], snapshot_times=window.times)


def run_vv_sweep(phi: Field, spec, cert: PCertificate | None, eps_list, window: EvalWindow,
                 base_config: SolveConfig | None = None, reference_phi: Field | None = None,
                 slope_min: float = 0.4, oracle_max_nodes: int = 4096) -> SweepReport:
    """Vanishing-viscosity sweep against a monotone inviscid reference.

    ``reference_phi`` may sample the same data on a finer grid (resolution a
    multiple of ``phi``'s); the reference is then solved there and restricted.
    For pure powers with p > 1 the Hopf-Lax solution is computed too and the
    distances to it are reported in ``details``.

    ``distances`` is the pairwise matrix over ``[eps_1, ..., eps_k, reference]``.
    The verdict requires distances to the reference to decrease strictly along
    ``eps_list`` and the log-log slope to be at least ``slope_min``; if every
    distance is zero the sweep passes with no rate fit.
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 3:
        raise ConfigError("eps_list needs at least 3 entries")
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError(f"eps_list must be positive and strictly decreasing (got {eps})")
    ref_phi = phi if reference_phi is None else reference_phi
    if ref_phi.box.side_length != phi.box.side_length or ref_phi.box.resolution % phi.box.resolution:
        raise ShapeError("reference grid must refine the sweep grid")

    jobs = [(phi, spec, _window_config(base_config, window, e), None) for e in eps]
    ref_config = replace(_window_config(base_config, window, 0.0), gradient="auto", flux="lf")
    jobs.append((ref_phi, spec, ref_config, None))
    trajs = _run_all(jobs)
    ref_fine = trajs[-1]
    if ref_phi is not phi:
        snaps = [(t, f.restrict(phi.box)) for t, f in ref_fine.snapshots]
        trajs[-1] = Trajectory(ref_fine.config, spec, ref_phi.restrict(phi.box), snaps, ref_fine.steps)

    dist = _pairwise(trajs, window)
    to_ref = dist[:-1, -1]
    runs = [_manifest(f"eps={e:g}", t) for e, t in zip(eps, trajs[:-1])]
    runs.append(_manifest("reference", ref_fine, reference_resolution=ref_fine.box.resolution))

    details = {"eps_list": eps, "distance_to_reference": to_ref.tolist()}
    p = regime_exponent(spec)
    if isinstance(spec, PurePower) and p > 1 and phi.values.size <= oracle_max_nodes:
        m = window.mask(phi.box)
        oracle = {t: hopf_lax_oracle(phi, t, p) for t in window.times}
        details["distance_to_hopf_lax"] = [
            max(float(np.max(np.abs(tr.at(t).values[m] - oracle[t].values[m]))) for t in window.times)
            for tr in trajs
        ]

    if np.all(to_ref == 0):
        rate_fit, verdict = None, True
    elif np.any(to_ref == 0):
        rate_fit, verdict = None, False
    else:
        coef, res, *_ = np.polyfit(np.log(eps), np.log(to_ref), 1, full=True)
        resid = float(res[0]) if len(res) else 0.0
        rate_fit = (float(coef[0]), float(coef[1]), resid)
        decreasing = bool(np.all(np.diff(to_ref) < 0))
        verdict = decreasing and rate_fit[0] >= slope_min
        details["strictly_decreasing"] = decreasing
    return SweepReport("vanishing_viscosity", runs, dist, rate_fit, bool(verdict), details, trajs)


def _shared_alpha(fields, spec, config: SolveConfig, eta: float) -> float:
    if isinstance(spec, NullH):
        return 0.0
    g = max(gradient_bound(f.values, f.box.dx) for f in fields)
    return speed_bound(spec, eta, config.alpha_margin * g)


def comparison_harness(phi_lo: Field, phi_hi: Field, spec, cert: PCertificate | None, config: SolveConfig,
                       slack: float = 1e-12) -> SweepReport:
    """Solve from ordered data with the same scheme and steps; check ordering.

    Both solves share one frozen speed bound, so they take identical time
    steps.  ``details['min_gap']`` is the smallest ``hi - lo`` per snapshot and,
    when ``phi_hi - phi_lo`` is constant, ``details['shift_deviation']`` is the
    largest change of that constant along the run.
    """
    if phi_lo.box != phi_hi.box:
        raise ShapeError("both data must live on the same box")
    if np.any(phi_lo.values > phi_hi.values):
        raise PreconditionError("phi_lo must not exceed phi_hi at any node")
    p = regime_exponent(spec)
    eta = config.eta
    if p is not None and p < 1 and eta == 0:
        eta = phi_lo.box.dx
        config = replace(config, eta=eta)
    alpha = _shared_alpha([phi_lo, phi_hi], spec, config, eta)
    lo, hi = _run_all([(phi_lo, spec, config, alpha), (phi_hi, spec, config, alpha)])

    gaps = [float(np.min(b.values - a.values)) for a, b in zip(lo.fields, hi.fields)]
    scale = max(1.0, phi_hi.sup, phi_lo.sup)
    ordered = all(g >= -slack * scale for g in gaps)
    details = {"min_gap": gaps, "alpha": alpha, "slack": slack, "ordered": ordered}
    shift = phi_hi.values - phi_lo.values
    # rounding in phi_lo + c leaves a spread of a few ulps
    if np.ptp(shift) <= 8 * np.finfo(float).eps * scale:
        c = float(np.median(shift))
        details["shift"] = c
        details["shift_deviation"] = max(float(np.max(np.abs(b.values - a.values - c)))
                                         for a, b in zip(lo.fields, hi.fields))
    sup = max(float(np.max(np.abs(b.values - a.values))) for a, b in zip(lo.fields, hi.fields))
    dist = np.array([[0.0, sup], [sup, 0.0]])
    runs = [_manifest("lo", lo), _manifest("hi", hi)]
    return SweepReport("comparison", runs, dist, None, ordered, details, [lo, hi])


def truncation_harness(growth_params: dict, n_list, spec, cert: PCertificate, config: SolveConfig,
                       window: EvalWindow, box: Box, min_ratio: float = 2.0,
                       grad_slack: float = 0.05) -> SweepReport:
    """Solve from the truncations ``min(q |x|^s, n)`` of unbounded growth data.

    The verdict requires (i) the window distance between consecutive levels to
    shrink by at least ``min_ratio`` from one pair to the next, and (ii) the
    data-free bound on ``grad(v^((p-1)/p))`` to hold at every window time for
    every level.  ``n_list`` is sorted internally.
    """
    p = regime_exponent(spec)
    if p is None or not p > 1:
        raise UnsupportedRegimeError("the truncation construction needs p > 1")
    levels = sorted(float(n) for n in n_list)
    if len(levels) < 2 or levels[0] <= 0 or len(set(levels)) != len(levels):
        raise ConfigError("n_list needs at least two distinct positive levels")
    cfg = _window_config(config, window, config.epsilon)
    params = {k: float(v) for k, v in growth_params.items()}
    datas = [make_initial("truncated_growth", {**params, "n": n}, box) for n in levels]
    trajs = _run_all([(phi, spec, cfg, None) for phi in datas])

    dist = _pairwise(trajs, window)
    consecutive = [float(dist[k, k + 1]) for k in range(len(levels) - 1)]
    cauchy = all(b == 0 or b * min_ratio <= a for a, b in zip(consecutive, consecutive[1:]))
    if any(a == 0 and b > 0 for a, b in zip(consecutive, consecutive[1:])):
        cauchy = False

    env, _ = derived_envelopes(spec, cert)
    worst, grad_ok, bound_values = math.inf, True, []
    for phi, tr in zip(datas, trajs):
        consts = derive_constants(cert, env, phi.sup, box.dim)
        reps = [r for r in check_grad_decay(tr, consts, slack=grad_slack) if r.bound_id == "gradxind"]
        grad_ok &= all(r.passed for r in reps)
        worst = min([worst] + [r.margin for r in reps])
        bound_values.append([r.bound_value for r in reps])
    details = {
        "levels": levels,
        "consecutive_distances": consecutive,
        "cauchy_ok": bool(cauchy),
        "gradxind_ok": bool(grad_ok),
        "gradxind_worst_margin": worst,
        "gradxind_bound_values": bound_values,
    }
    runs = [_manifest(f"n={n:g}", tr, level=n) for n, tr in zip(levels, trajs)]
    return SweepReport("truncation", runs, dist, None, bool(cauchy and grad_ok), details, trajs)
