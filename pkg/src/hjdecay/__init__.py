"""Solvers and audits for decay estimates of viscous Hamilton-Jacobi flows

    v_t - eps Lap v + H(|grad v|) = 0

on a periodic box, together with their inviscid limits.
"""

from .bounds import (
    BoundReport,
    DerivedConstants,
    check_ball_mass,
    check_dt_bounds,
    check_dt_homogeneous,
    check_grad_decay,
    check_time_holder,
    derive_constants,
)
from .errors import *  # noqa: F401,F403
from .evolve import (
    SolveConfig,
    Trajectory,
    hopf_lax_oracle,
    load_trajectory,
    save_trajectory,
    solve_inviscid_lf,
    solve_viscous,
    stable_dt,
    step_viscous,
)
from .field import BallSpec, Box, Field, ball_integral, grad_mag_central, laplacian, make_initial, sup_metrics
from .hamiltonian import (
    AuditPlan,
    GrowthEnvelope,
    NullH,
    PCertificate,
    PowerPlusShifted,
    PowerSum,
    PurePower,
    certify,
    derived_envelopes,
    eval_h,
    eval_phi_eta,
    eval_theta_eta,
)
from .sweep import EvalWindow, SweepReport, comparison_harness, run_vv_sweep, truncation_harness

__version__ = "0.1.0"
