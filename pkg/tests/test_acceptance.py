"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Frozen reference values are computed from closed forms in this file, not
from the library, so a wrong library constant shows up as a failure here.
"""

import time

import numpy as np
import pytest

from hjdecay.bounds import (
    check_ball_mass,
    check_dt_bounds,
    check_dt_homogeneous,
    check_time_holder,
    derive_constants,
    time_derivatives,
)
from hjdecay.evolve import SolveConfig, hopf_lax_oracle, solve_inviscid_lf, solve_viscous
from hjdecay.field import BallSpec, Box, grad_mag_central, make_initial
from hjdecay.hamiltonian import AuditPlan, NullH, PurePower, certify, derived_envelopes
from hjdecay.sweep import EvalWindow, comparison_harness, run_vv_sweep, truncation_harness

P2 = PurePower(2.0)
TWO_PI = 2 * np.pi

# closed-form p-condition constants (a, b, gamma)
FROZEN_CERT = {0.5: (0.5, 1.0, 0.5), 1.5: (0.5, 0.5, 1.5), 2.0: (1.0, 1.0, 2.0), 3.0: (1.0, 2.0, 2.5)}


def theta_closed_form(p, eta, s):
    # Phi(s) = (s + eta^2)^(p/2) - eta^p, Theta = 2 s Phi'(s) - Phi(s)
    w = s + eta * eta
    return p * s * w ** (p / 2 - 1) - w ** (p / 2) + eta**p


def constants(spec, sup_phi, dim=1):
    cert = certify(spec)
    env, _ = derived_envelopes(spec, cert)
    return derive_constants(cert, env, sup_phi, dim)


def snapshots_with_pairs(centers, delta=1e-3):
    ts = np.concatenate([np.asarray(centers) - delta / 2, np.asarray(centers) + delta / 2])
    return tuple(np.unique(np.round(ts, 12)))


# --- 1 ---------------------------------------------------------------------------


def test_criterion_01_certificates(criterion):
    plan = AuditPlan(n_r=200, etas=(1e-1, 1e-2, 1e-3, 1e-4), rel_slack=1e-10)
    start = time.perf_counter()
    certs = {p: certify(PurePower(p), plan) for p in FROZEN_CERT}
    elapsed = time.perf_counter() - start
    ok = elapsed < 1.0
    r = plan.r_grid()
    for p, (a, b, gamma) in FROZEN_CERT.items():
        c = certs[p]
        ok &= np.allclose((c.a, c.b, c.gamma), (a, b, gamma), rtol=1e-14, atol=0)
        for eta in plan.etas:
            th = theta_closed_form(p, eta, r)
            main, tail = a * r ** (p / 2), b * eta**gamma
            deficit = (main - tail - th) if p > 1 else (th - tail + main)
            ok &= bool(np.all(deficit <= 1e-10 * (np.abs(th) + main + tail)))
    assert criterion(1, ok, f"p in {sorted(FROZEN_CERT)} certified on 200x4 grid in {elapsed:.3f} s")


# --- 2 ---------------------------------------------------------------------------


def test_criterion_02_heat_kernel(criterion):
    box = Box(1, TWO_PI, 512)
    phi = make_initial("cosine", {"A": 1.0}, box)
    traj = solve_viscous(phi, NullH(), SolveConfig(1.0, 1.0, (1.0,), epsilon_ceiling=1.0))
    x = box.axis()
    # the cosine preset is (1 + cos x)/2; only the oscillating mode decays
    exact = 0.5 * (1.0 + np.exp(-((TWO_PI / box.side_length) ** 2) * 1.0) * np.cos(x))
    err = float(np.max(np.abs(traj.at(1.0).values - exact)))
    assert criterion(2, err <= 1e-3, f"sup error at t=1 is {err:.3e} (tolerance 1e-3)")


# --- 3 ---------------------------------------------------------------------------


def brute_hopf_lax_p2(phi, t):
    # for H(r) = r^2 the Lagrangian is q^2 / 4
    x = phi.box.axis()
    d = np.abs(x[:, None] - x[None, :])
    d = np.minimum(d, phi.box.side_length - d)
    return np.min(phi.values[None, :] + d**2 / (4 * t), axis=1)


def test_criterion_03_hopf_lax(criterion):
    t, dists = 0.5, []
    for n in (256, 1024):
        phi = make_initial("cone", {"A": 1.0, "r0": 1.0}, Box(1, TWO_PI, n))
        oracle = brute_hopf_lax_p2(phi, t)
        assert np.allclose(hopf_lax_oracle(phi, t, 2.0).values, oracle, rtol=0, atol=1e-13)
        v = solve_inviscid_lf(phi, P2, SolveConfig(0.0, t, (t,))).at(t).values
        dists.append(float(np.max(np.abs(v - oracle))))
    order = float(np.log(dists[0] / dists[1]) / np.log(4))
    ok = dists[1] < dists[0] and order >= 0.5
    assert criterion(3, ok, f"distances {dists[0]:.4f} -> {dists[1]:.4f}, order {order:.3f} (need >= 0.5)")


# --- 4, 5 ----------------------------------------------------------------------------

DECAY_TIMES = tuple(np.unique(np.round(np.concatenate([np.geomspace(0.01, 0.1, 6),
                                                          np.geomspace(0.05, 5, 12)]), 12)))


@pytest.fixture(scope="module")
def decay_runs():
    box = Box(1, TWO_PI, 1024)
    runs = {}
    for amp in (1.0, 10.0, 100.0):
        phi = make_initial("cosine", {"A": amp}, box)
        for eps in (0.1, 0.01, 0.001):
            runs[amp, eps] = solve_viscous(phi, P2, SolveConfig(eps, 5.0, DECAY_TIMES))
    return runs


def test_criterion_04_gradient_decay(criterion, decay_runs):
    ok, worst, best_ratio = True, np.inf, 0.0
    for (amp, eps), traj in decay_runs.items():
        if amp == 100.0:
            continue
        # lambda_2 = 1, so the bound is |phi|^(1/2) t^(-1/2)
        k = constants(P2, traj.initial_sup)
        assert k.lambda_p == 1.0 and traj.initial_sup == pytest.approx(amp)
        for t, f in traj.snapshots:
            g = float(np.max(grad_mag_central(f).values))
            bound = np.sqrt(amp / t)
            if 0.05 <= t <= 5:
                ok &= g <= 1.05 * bound
                worst = min(worst, 1.05 - g / bound)
            if amp == 10.0 and 0.01 <= t <= 0.1:
                best_ratio = max(best_ratio, g / bound)
    ok &= best_ratio > 0.3
    assert criterion(4, ok, f"min headroom {worst:.3f} of the bound; best observed/bound on [0.01, 0.1] "
                             f"for A=10 is {best_ratio:.3f} (need > 0.3)")


def test_criterion_05_data_independent_gradient(criterion, decay_runs):
    ok, worst, lines = True, np.inf, set()
    for (amp, eps), traj in decay_runs.items():
        k = constants(P2, traj.initial_sup)
        lines.add(tuple(np.asarray(k.gradxind_bound(np.array(DECAY_TIMES))).round(15)))
        for t, f in traj.snapshots:
            w = f.with_values(np.sqrt(np.maximum(f.values, 0.0)))
            g = float(np.max(grad_mag_central(w).values))
            bound = 0.5 / np.sqrt(t)  # mu_2 = 1/2
            ok &= g <= 1.05 * bound
            worst = min(worst, 1.05 - g / bound)
    ok &= len(lines) == 1
    assert criterion(5, ok, f"one bound line across A in {{1, 10, 100}}; min headroom {worst:.4f}")


# --- 6, 7 ----------------------------------------------------------------------------


def test_criterion_06_time_derivative(criterion):
    box = Box(1, TWO_PI, 512)
    phi = make_initial("cosine", {"A": 1.0}, box)
    times = snapshots_with_pairs(np.geomspace(0.1, 2, 12))
    k = constants(P2, phi.sup)
    assert k.L_const == pytest.approx(4.0)
    kw = dict(slack=0.10, max_gap=1.001e-3, t_range=(0.1, 2.001))
    visc = solve_viscous(phi, P2, SolveConfig(0.05, times[-1], times))
    reps = check_dt_bounds(visc, k, 0.05, **kw)
    lf = solve_inviscid_lf(phi, P2, SolveConfig(0.0, times[-1], times, flux="lf"))
    reps += check_dt_bounds(lf, k, 0.0, atol=1e-10, **kw)
    # for reference only: the godunov flux does not diffuse at minima
    god = solve_inviscid_lf(phi, P2, SolveConfig(0.0, times[-1], times, flux="godunov"))
    god_up = max(r.observed for r in check_dt_bounds(god, k, 0.0, atol=1e-10, **kw) if r.bound_id == "vdt_upper")
    ids = {r.bound_id for r in reps}
    ok = ids == {"dudtpl", "dudtmn", "vdt_upper", "vdt_lower"} and all(r.passed for r in reps)
    up = max(r.observed for r in reps if r.bound_id == "vdt_upper")
    verdicts = ", ".join(f"{i} {'ok' if all(r.passed for r in reps if r.bound_id == i) else 'violated'}"
                         for i in sorted(ids))
    assert criterion(6, ok, f"{verdicts}; max LF dv/dt {up:.2e} (need <= 1e-10), godunov flux {god_up:.1e}")


def test_criterion_07_inverse_time(criterion):
    phi = make_initial("cosine", {"A": 1.0}, Box(1, TWO_PI, 512))
    times = snapshots_with_pairs(np.linspace(1, 5, 8))
    traj = solve_viscous(phi, P2, SolveConfig(0.05, times[-1], times))
    rep = check_dt_homogeneous(traj, 1.0, window=(0.999, 5.001), max_ratio=2.0, max_gap=1.001e-3)
    n = len(time_derivatives(traj, max_gap=1.001e-3, t_range=(0.999, 5.001)))
    ok = rep.passed and n == 8
    assert criterion(7, ok, f"max/min of t sup|dv/dt| over {n} times is {rep.observed:.3f} (need <= 2)")


# --- 8, 9 ----------------------------------------------------------------------------


def test_criterion_08_holder(criterion):
    phi = make_initial("cosine", {"A": 1.0}, Box(1, TWO_PI, 512))
    hs = (0.01, 0.02, 0.04, 0.08)
    times = tuple(round(0.5 + h, 12) for h in (0.0,) + hs)
    traj = solve_viscous(phi, P2, SolveConfig(0.05, times[-1], times))
    slope, spread = check_time_holder(traj, constants(P2, phi.sup), 0.05, hs, 0.5)
    ok = slope.passed and spread.passed
    assert criterion(8, ok, f"slope {slope.observed:.3f} (need >= 0.5), C1 spread {spread.observed:.3f} "
                             f"(need <= 3), max C1 {spread.fitted_constant:.3g}")


def test_criterion_09_ball_mass(criterion):
    phi = make_initial("bump", {"A": 4.0, "r0": 1.0}, Box(1, 10.0, 1024))
    traj = solve_viscous(phi, P2, SolveConfig(0.05, 1.0, (0.1, 1.0)))
    balls = [BallSpec((0.0,), r) for r in (0.5, 1.0, 2.0)]
    reps = check_ball_mass(traj, balls, certify(P2), pairs=[(0.1, 1.0)], ceiling=10.0)
    c = reps[0].fitted_constant
    ok = len(reps) == 3 and all(r.passed for r in reps) and c <= 10 and all(r.margin >= -1e-12 for r in reps)
    assert criterion(9, ok, f"fitted C = {c:.4f} over 3 triples (need <= 10)")


# --- 10 --------------------------------------------------------------------------------


def test_criterion_10_comparison(criterion):
    box = Box(1, TWO_PI, 512)
    cfg = SolveConfig(0.0, 1.0, (0.25, 0.5, 1.0))
    cert = certify(P2)
    pairs = [
        (("cone", {"A": 1.0, "r0": 1.0}), ("bump", {"A": 2.0, "r0": 1.5})),
        (("cosine", {"A": 1.0}), ("cosine", {"A": 2.0})),
        (("bump", {"A": 1.0, "r0": 1.0}), ("bump", {"A": 3.0, "r0": 1.0})),
    ]
    ok, gaps = True, []
    for (lo_name, lo_par), (hi_name, hi_par) in pairs:
        rep = comparison_harness(make_initial(lo_name, lo_par, box), make_initial(hi_name, hi_par, box),
                                 P2, cert, cfg, slack=1e-12)
        ok &= rep.verdict and min(rep.details["min_gap"]) >= -1e-12
        gaps.append(min(rep.details["min_gap"]))
    lo = make_initial("cosine", {"A": 1.0}, box)
    shift = comparison_harness(lo, lo.with_values(lo.values + 0.5), P2, cert, cfg)
    dev = shift.details["shift_deviation"]
    ok &= shift.verdict and dev <= 1e-10
    assert criterion(10, ok, f"min gaps {[f'{g:.2e}' for g in gaps]}; shift deviation {dev:.1e} (need <= 1e-10)")


# --- 11, 12 ----------------------------------------------------------------------------


def test_criterion_11_vanishing_viscosity(criterion):
    phi = make_initial("cosine", {"A": 1.0}, Box(1, TWO_PI, 512))
    fine = make_initial("cosine", {"A": 1.0}, Box(1, TWO_PI, 2048))
    rep = run_vv_sweep(phi, P2, certify(P2), [0.2, 0.1, 0.05, 0.025], EvalWindow((0.5, 1.0, 2.0), 0.5),
                       reference_phi=fine, slope_min=0.4)
    d = rep.details["distance_to_reference"]
    slope = rep.rate_fit[0] if rep.rate_fit else float("nan")
    ok = rep.verdict and all(b < a for a, b in zip(d, d[1:])) and slope >= 0.4
    assert criterion(11, ok, f"distances {[round(x, 4) for x in d]}, slope {slope:.3f} (need >= 0.4)")


def test_criterion_12_truncation(criterion):
    rep = truncation_harness({"q": 1.0, "s": 1.0}, [1, 2, 4, 8], P2, certify(P2),
                             SolveConfig(0.05, 2.0, (0.5, 1.0, 2.0)), EvalWindow((0.5, 1.0, 2.0), 0.2),
                             Box(1, 20.0, 512), min_ratio=2.0, grad_slack=0.05)
    d = rep.details["consecutive_distances"]
    halving = all(b == 0 or 2 * b <= a for a, b in zip(d, d[1:]))
    ok = rep.verdict and halving and rep.details["gradxind_ok"]
    assert criterion(12, ok, f"consecutive distances {[f'{x:.2e}' for x in d]}; gradxind worst margin "
                              f"{rep.details['gradxind_worst_margin']:.3g}")
