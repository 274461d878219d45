"""Audit solver trajectories against the decay estimates.

Each check returns :class:`BoundReport` records.  ``margin`` is signed so that
a positive value always means the estimate holds with room to spare: it is
``bound - observed`` for upper bounds and ``observed - bound`` for lower
bounds.  A report passes when ``margin >= -slack * |bound|``.

Estimates whose constants are not explicit (the t^-1 envelope, the Hoelder
estimate in time, the ball-mass estimate) are checked as scaling forms with a
fitted constant, reported in ``fitted_constant``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, InsufficientDataError, UnsupportedRegimeError
from .field import BallSpec, Field, ball_integral, grad_mag_central
from .hamiltonian import GrowthEnvelope, PCertificate, PurePower, running_max_h

__all__ = [
    "DerivedConstants",
    "BoundReport",
    "BOUND_IDS",
    "derive_constants",
    "check_grad_decay",
    "check_dt_bounds",
    "check_dt_homogeneous",
    "check_time_holder",
    "check_ball_mass",
    "time_derivatives",
    "summarize",
    "write_reports",
    "read_reports",
]

BOUND_IDS = (
    "gradx",
    "gradxind",
    "vdt_upper",
    "vdt_lower",
    "dudtpl",
    "dudtmn",
    "t_minus_one",
    "holder_t",
    "ball_mass",
    "heat_kernel",
)


@dataclass(frozen=True)
class DerivedConstants:
    """Closed-form constants of the gradient and time-derivative estimates."""

    p: float
    a: float
    b: float
    gamma: float
    dim: int
    sup_phi: float
    g_H: float
    kappa0: float
    kappa_inf: float
    lambda_p: float
    mu_p: float
    L_const: float
    dudt_coeff: float

    def mu_exponent(self, t):
        """kappa0/p for t <= 1 and kappa_inf/p for t > 1."""
        t = np.asarray(t, dtype=float)
        out = np.where(t <= 1.0, self.kappa0 / self.p, self.kappa_inf / self.p)
        return out if out.ndim else float(out)

    def K_eta(self, eta: float) -> float:
        """Square of the gradient-bound coefficient before letting eta -> 0."""
        p, a, b, g = self.p, self.a, self.b, self.gamma
        if p > 1:
            return (1.0 / a + p / (2.0 * a) * eta ** (g / 4.0)) ** (2.0 / p) * ((p - 1.0) / p) ** 2
        return ((2.0 + b * p * eta ** (g / 4.0)) / (2.0 ** (p / 2.0) * a * p)) ** (2.0 / p) * (
            2.0 * eta ** (g / 2.0) + self.sup_phi
        ) ** ((2.0 - p) / p)

    def gradx_bound(self, t):
        return self.lambda_p * self.sup_phi ** (1.0 / self.p) * (self.a * np.asarray(t, dtype=float)) ** (-1.0 / self.p)

    def gradxind_bound(self, t):
        return self.mu_p * np.asarray(t, dtype=float) ** (-1.0 / self.p)

    def dudt_viscous_term(self, t, epsilon):
        return self.dudt_coeff * math.sqrt(epsilon) * np.asarray(t, dtype=float) ** (-(self.p + 2.0) / (2.0 * self.p))

    def vdt_lower_bound(self, t):
        return -self.L_const * np.asarray(t, dtype=float) ** (-self.mu_exponent(t))


def derive_constants(cert: PCertificate, envelope: GrowthEnvelope, sup_phi: float, dim: int) -> DerivedConstants:
    """Evaluate lambda_p, mu_p, L and the time-derivative coefficient.

    >>> from hjdecay.hamiltonian import PurePower, certify, derived_envelopes
    >>> c = certify(PurePower(2.0))
    >>> env, _ = derived_envelopes(PurePower(2.0), c)
    >>> k = derive_constants(c, env, 1.0, 1)
    >>> k.lambda_p, k.mu_p, k.L_const
    (1.0, 0.5, 4.0)
    """
    p, a = cert.p, cert.a
    if p == 1:
        raise UnsupportedRegimeError("p = 1 is excluded")
    if sup_phi < 0 or dim < 1:
        raise DomainError("need sup_phi >= 0 and dim >= 1")
    lam = 1.0 if p > 1 else (2.0 / p) ** (1.0 / p)
    mu_p = (p - 1.0) * a ** (-1.0 / p) / p
    base = 2.0 * lam**p * sup_phi / a
    L = envelope.g_H * (base ** (envelope.kappa0 / p) + base ** (envelope.kappa_inf / p))
    coeff = 2.0 ** ((p + 1.0) / p) * dim * lam * sup_phi ** (1.0 / p) * a ** (-1.0 / p)
    return DerivedConstants(
        p=p, a=a, b=cert.b, gamma=cert.gamma, dim=dim, sup_phi=sup_phi,
        g_H=envelope.g_H, kappa0=envelope.kappa0, kappa_inf=envelope.kappa_inf,
        lambda_p=lam, mu_p=mu_p, L_const=L, dudt_coeff=coeff,
    )


@dataclass(frozen=True)
class BoundReport:
    bound_id: str
    time: float
    observed: float
    bound_value: float
    margin: float
    passed: bool
    fitted_constant: float | None = None

    @classmethod
    def upper(cls, bound_id, time, observed, bound, slack, atol=0.0, fitted=None):
        margin = bound - observed
        return cls(bound_id, float(time), float(observed), float(bound), float(margin),
                   bool(margin >= -slack * abs(bound) - atol), fitted)

    @classmethod
    def lower(cls, bound_id, time, observed, bound, slack, atol=0.0, fitted=None):
        margin = observed - bound
        return cls(bound_id, float(time), float(observed), float(bound), float(margin),
                   bool(margin >= -slack * abs(bound) - atol), fitted)

    def row(self):
        fc = "" if self.fitted_constant is None else repr(float(self.fitted_constant))
        return [self.bound_id, repr(self.time), repr(self.observed), repr(self.bound_value),
                repr(self.margin), str(self.passed).lower(), fc]


CSV_COLUMNS = ["bound_id", "time", "observed", "bound_value", "margin", "pass", "fitted_constant"]


def _in_range(t, t_range):
    return t_range is None or (t_range[0] - 1e-12 <= t <= t_range[1] + 1e-12)


def _power_field(f: Field, exponent: float) -> Field:
    v = f.values
    if np.min(v) < -1e-12 * max(1.0, float(np.max(np.abs(v)))):
        raise DataError(f"negative values (min {np.min(v):.3g}) cannot be raised to a fractional power")
    w = np.where(v < 1e-14, 0.0, np.maximum(v, 0.0)) ** exponent
    return Field(f.box, w)


def check_grad_decay(traj, consts: DerivedConstants, slack=0.05, t_range=None) -> list:
    """Sup of |grad v| against both gradient estimates, at every snapshot.

    The data-free estimate on ``grad(v^((p-1)/p))`` is only checked for p > 1.
    """
    out = []
    p = consts.p
    for t, f in traj.snapshots:
        if t <= 0 or not _in_range(t, t_range):
            continue
        g = float(np.max(grad_mag_central(f).values))
        out.append(BoundReport.upper("gradx", t, g, consts.gradx_bound(t), slack))
        if p > 1:
            w = _power_field(f, (p - 1.0) / p)
            gw = float(np.max(grad_mag_central(w).values))
            out.append(BoundReport.upper("gradxind", t, gw, consts.gradxind_bound(t), slack))
    return out


def time_derivatives(traj, max_gap=None, t_range=None):
    """Forward differences of consecutive snapshots, attributed to the midpoint time.

    Returns a list of ``(t_mid, dv_dt_values)``.
    """
    snaps = traj.snapshots
    if len(snaps) < 2:
        raise InsufficientDataError("at least two snapshots are needed for a time derivative")
    out = []
    for (t0, f0), (t1, f1) in zip(snaps, snaps[1:]):
        if max_gap is not None and t1 - t0 > max_gap * (1 + 1e-9):
            continue
        tm = 0.5 * (t0 + t1)
        if not _in_range(tm, t_range):
            continue
        out.append((tm, (f1.values - f0.values) / (t1 - t0)))
    return out


def check_dt_bounds(traj, consts: DerivedConstants, epsilon, slack=0.10, t_range=None, max_gap=None,
                    atol=1e-10) -> list:
    """Upper and lower envelopes of the discrete time derivative.

    For ``epsilon > 0`` the reports are ``dudtpl`` and ``dudtmn``; for the
    inviscid limit they are ``vdt_upper`` (``dv/dt <= 0``, absolute tolerance
    ``atol``) and ``vdt_lower``.
    """
    out = []
    for tm, dv in time_derivatives(traj, max_gap=max_gap, t_range=t_range):
        hi, lo = float(np.max(dv)), float(np.min(dv))
        lower = consts.vdt_lower_bound(tm)
        if epsilon > 0:
            visc = consts.dudt_viscous_term(tm, epsilon)
            out.append(BoundReport.upper("dudtpl", tm, max(hi, 0.0), visc, slack))
            out.append(BoundReport.lower("dudtmn", tm, lo, lower - visc, slack))
        else:
            out.append(BoundReport.upper("vdt_upper", tm, hi, 0.0, slack, atol=atol))
            out.append(BoundReport.lower("vdt_lower", tm, lo, lower, slack))
    return out


def check_dt_homogeneous(traj, rho, slack=0.0, window=None, max_ratio=2.0, max_gap=None) -> BoundReport:
    """t^-1 envelope for pure powers: ``t * sup|dv/dt|`` stays within a factor ``max_ratio``.

    The window defaults to ``[rho, t_end]`` for p <= 2 and ``(0, rho]`` for
    p > 2.  ``observed`` is the max/min ratio of the product over the window
    and ``fitted_constant`` its maximum (the constant C of the envelope).
    """
    if not isinstance(traj.spec, PurePower):
        raise UnsupportedRegimeError("the t^-1 envelope needs H(r) = r^p")
    p = traj.spec.p
    if window is None:
        window = (rho, traj.config.t_end) if p <= 2 else (0.0, rho)
    prods = [tm * float(np.max(np.abs(dv))) for tm, dv in time_derivatives(traj, max_gap=max_gap, t_range=window)]
    if len(prods) < 2:
        raise InsufficientDataError("need at least two derivative samples in the window")
    top, bottom = max(prods), min(prods)
    if top == 0:
        ratio = 1.0
    elif bottom == 0:
        ratio = math.inf
    else:
        ratio = top / bottom
    rep = BoundReport.upper("t_minus_one", rho, ratio, max_ratio, slack, fitted=top)
    if not math.isfinite(top):
        rep = BoundReport("t_minus_one", float(rho), ratio, max_ratio, -math.inf, False, top)
    return rep


def check_time_holder(traj, consts: DerivedConstants, epsilon, h_list, t, slope_min=0.5, spread_max=3.0,
                      slack=0.0) -> list:
    """Hoelder-in-time estimate as a scaling form.

    Computes ``d(h) = |v(t+h) - v(t)|_inf`` for every ``h`` and the constant
    ``C1(h) = d(h) / (h^(1/2) F)`` with
    ``F = sqrt(eps) |phi|^(1/p) t^(-1/p) + Q(lambda_p |phi|^(1/p) (a t)^(-1/p))``.
    Two reports: the log-log slope of ``d`` against ``h`` (lower bound
    ``slope_min``) and the spread ``max C1 / min C1`` (upper bound ``spread_max``).
    """
    h = np.asarray(h_list, dtype=float)
    if np.any(h <= 0) or np.any(h >= 1):
        raise DomainError("every h must lie in (0, 1)")
    try:
        base = traj.at(t)
        d = np.array([float(np.max(np.abs(traj.at(t + hk).values - base.values))) for hk in h])
    except KeyError as exc:
        raise InsufficientDataError(f"the snapshot grid lacks a needed time ({exc})") from None
    p = consts.p
    scale = consts.sup_phi ** (1.0 / p)
    F = math.sqrt(epsilon) * scale * t ** (-1.0 / p) + running_max_h(traj.spec, float(consts.gradx_bound(t)))
    if np.all(d == 0):
        return [BoundReport.lower("holder_t", t, math.inf, slope_min, slack, fitted=0.0),
                BoundReport.upper("holder_t", t, 1.0, spread_max, slack, fitted=0.0)]
    if np.any(d == 0):
        raise DataError("some but not all increments vanish; refine the snapshot grid")
    slope = float(np.polyfit(np.log(h), np.log(d), 1)[0])
    c1 = d / (np.sqrt(h) * F)
    spread = float(np.max(c1) / np.min(c1))
    return [BoundReport.lower("holder_t", t, slope, slope_min, slack, fitted=float(np.max(c1))),
            BoundReport.upper("holder_t", t, spread, spread_max, slack, fitted=float(np.max(c1)))]


def check_ball_mass(traj, balls, cert: PCertificate, pairs=None, ceiling=10.0) -> list:
    """Mass propagation ``int_{B_R} v(t) <= int_{B_2R} v(s) + C (t-s) R^N (1 + R^(-p/(p-1)))``.

    ``C`` is fitted as the largest ratio of the left-hand excess to the form
    factor over all (ball, s, t) triples.  Every report shares that constant
    and passes iff it does not exceed ``ceiling``.
    """
    p = cert.p
    if not p > 1:
        raise UnsupportedRegimeError("the ball-mass estimate needs p > 1")
    box = traj.box
    for ball in balls:
        ball.check_fits(box)
    if pairs is None:
        ts = list(traj.times)
        pairs = [(s, t) for i, s in enumerate(ts) for t in ts[i + 1:]]
    rows = []
    for ball in balls:
        big = ball.doubled()
        for s, t in pairs:
            if not t > s:
                raise DomainError("need t > s")
            excess = ball_integral(traj.at(t), ball) - ball_integral(traj.at(s), big)
            R = ball.radius
            form = (t - s) * R**box.dim * (1.0 + R ** (-p / (p - 1.0)))
            rows.append((t, excess, form))
    fitted = max(e / f for _, e, f in rows)
    used = max(fitted, 0.0)
    return [
        BoundReport("ball_mass", float(t), float(e), float(used * f), float(used * f - e),
                    bool(fitted <= ceiling), float(fitted))
        for t, e, f in rows
    ]


def summarize(reports) -> dict:
    margins = [r.margin for r in reports]
    return {
        "n_checks": len(reports),
        "n_pass": sum(r.passed for r in reports),
        "worst_margin": min(margins) if margins else None,
    }


def write_reports(reports, csv_path, json_path=None) -> dict:
    """BoundReport CSV plus an optional JSON summary; returns the summary."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow(r.row())
    summary = summarize(reports)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def read_reports(csv_path) -> list:
    out = []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            fc = row["fitted_constant"]
            out.append(BoundReport(row["bound_id"], float(row["time"]), float(row["observed"]),
                                   float(row["bound_value"]), float(row["margin"]), row["pass"] == "true",
                                   float(fc) if fc else None))
    return out

