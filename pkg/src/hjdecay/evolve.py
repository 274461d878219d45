"""Explicit time integration of the regularized viscous flow and its inviscid limit.

Both solvers advance

    v_t - eps * Lap v + Hhat(v) = 0

with forward Euler, where ``Hhat`` is a numerical Hamiltonian consistent with
``Phi_eta(|grad v|^2)``.  Three numerical Hamiltonians are available:

``central``   ``Phi_eta(|D0 v|^2)``; monotone only when ``2 eps >= alpha dx``.
``godunov``   ``Phi_eta(sum_d max(D-_d v, -D+_d v, 0)^2)``; monotone at the CFL
              below, and never negative, so ``v`` is nonincreasing in time
              when ``eps = 0``.
``lf``        Lax-Friedrichs, ``Phi_eta(|avg(D+, D-)|^2) - sum_d alpha/2 (D+_d - D-_d) v``.

The time step is re-derived every step from the current gradient sup:

    dt = safety / (2 dim eps / dx^2 + dim alpha / dx),

with ``alpha`` the largest Lipschitz speed of the Hamiltonian on
``[0, alpha_margin * |grad v|_inf]``.  At ``safety <= 1`` every update is a
convex combination of neighbouring values (for the monotone choices), which
gives the discrete maximum and comparison principles.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    BudgetError,
    DomainError,
    InvariantError,
    PreconditionError,
    StabilityError,
    UnsupportedRegimeError,
)
from .field import Box, Field, field_from_csv, field_to_csv, laplacian_values, periodic_distance
from .hamiltonian import NullH, phi as phi_eta, regime_exponent, spec_from_dict, spec_to_dict, speed_bound

__all__ = [
    "SolveConfig",
    "Trajectory",
    "stable_dt",
    "step_viscous",
    "solve_viscous",
    "solve_inviscid_lf",
    "hopf_lax_oracle",
    "gradient_bound",
    "save_trajectory",
    "load_trajectory",
]

_SCHEMES = ("auto", "central", "godunov", "lf")


@dataclass(frozen=True)
class SolveConfig:
    """Parameters of one solve.

    ``gradient`` picks the numerical Hamiltonian of the viscous solver
    (``auto`` uses ``central`` whenever it is monotone and ``godunov``
    otherwise); ``flux`` picks the one of the inviscid solver.
    """

    epsilon: float
    t_end: float
    snapshot_times: tuple
    eta: float = 0.0
    cfl_safety: float = 0.5
    alpha_margin: float = 1.1
    max_steps: int = 5_000_000
    epsilon_ceiling: float = 0.5
    gradient: str = "auto"
    flux: str = "lf"

    def __post_init__(self):
        times = tuple(float(t) for t in self.snapshot_times)
        object.__setattr__(self, "snapshot_times", times)
        if not times:
            raise InvariantError("snapshot_times must be nonempty")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvariantError("snapshot_times must be strictly increasing")
        if not self.t_end > 0:
            raise InvariantError("t_end must be positive")
        if times[0] <= 0 or times[-1] > self.t_end * (1 + 1e-12):
            raise InvariantError("snapshot_times must lie in (0, t_end]")
        if not 0 < self.cfl_safety <= 1:
            raise InvariantError("cfl_safety must lie in (0, 1]")
        if not self.alpha_margin >= 1:
            raise InvariantError("alpha_margin must be >= 1")
        if self.epsilon < 0 or self.eta < 0:
            raise InvariantError("epsilon and eta must be nonnegative")
        if self.epsilon > self.epsilon_ceiling:
            raise InvariantError(f"epsilon={self.epsilon} exceeds the ceiling {self.epsilon_ceiling}")
        if self.gradient not in _SCHEMES or self.flux not in ("lf", "godunov"):
            raise InvariantError(f"unknown scheme gradient={self.gradient!r} flux={self.flux!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snapshot_times"] = list(self.snapshot_times)
        return d


@dataclass
class Trajectory:
    """Snapshots ``(t, Field)`` of one solve, with the data it started from."""

    config: SolveConfig
    spec: object
    initial: Field
    snapshots: list = field(default_factory=list)
    steps: int = 0

    def __post_init__(self):
        times = [t for t, _ in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvariantError("snapshot times must be strictly increasing")

    @property
    def initial_sup(self) -> float:
        return self.initial.sup

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def fields(self) -> list:
        return [f for _, f in self.snapshots]

    @property
    def box(self) -> Box:
        return self.initial.box

    def at(self, t: float, rtol: float = 1e-9) -> Field:
        """Snapshot stored at time ``t``."""
        for s, f in self.snapshots:
            if abs(s - t) <= rtol * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")


# ---------------------------------------------------------------------------
# time step and numerical Hamiltonians


def gradient_bound(values, dx) -> float:
    """sqrt(sum_d max|D+_d v|^2): bounds every one-sided, averaged or central gradient."""
    sq = 0.0
    for ax in range(values.ndim):
        d = np.max(np.abs(np.diff(values, axis=ax, append=np.take(values, [0], axis=ax))))
        sq += (d / dx) ** 2
    return math.sqrt(sq)


def _dt(dx, dim, epsilon, alpha, safety, t_end):
    denom = 2.0 * dim * epsilon / dx**2 + dim * alpha / dx
    if denom == 0:
        return t_end
    return safety / denom


def stable_dt(box: Box, spec, epsilon, eta, grad_bound, cfl_safety, alpha_margin=1.0, t_end=math.inf):
    """Largest explicit step keeping the scheme monotone.

    ``alpha`` is the sup of ``2 r Phi_eta'(r^2)`` over ``[0, alpha_margin * grad_bound]``;
    returns ``t_end`` when both ``epsilon`` and ``alpha`` vanish.
    """
    if grad_bound < 0:
        raise DomainError("grad_bound must be nonnegative")
    alpha = 0.0 if isinstance(spec, NullH) else speed_bound(spec, eta, alpha_margin * grad_bound)
    return _dt(box.dx, box.dim, epsilon, alpha, cfl_safety, t_end)


def _differences(v, dx):
    fwd, bwd = [], []
    for ax in range(v.ndim):
        up = np.roll(v, -1, axis=ax)
        down = np.roll(v, 1, axis=ax)
        fwd.append((up - v) / dx)
        bwd.append((v - down) / dx)
    return fwd, bwd


def _numerical_hamiltonian(kind, spec, eta, v, dx, alpha):
    if isinstance(spec, NullH):
        return np.zeros_like(v)
    fwd, bwd = _differences(v, dx)
    sq = np.zeros_like(v)
    if kind == "central":
        for f, b in zip(fwd, bwd):
            c = 0.5 * (f + b)
            sq += c * c
        return phi_eta(spec, eta, sq)
    if kind == "godunov":
        for f, b in zip(fwd, bwd):
            s = np.maximum(np.maximum(b, -f), 0.0)
            sq += s * s
        return phi_eta(spec, eta, sq)
    if kind == "lf":
        visc = np.zeros_like(v)
        for f, b in zip(fwd, bwd):
            c = 0.5 * (f + b)
            sq += c * c
            visc += f - b
        return phi_eta(spec, eta, sq) - 0.5 * alpha * visc
    raise ValueError(f"unknown numerical Hamiltonian {kind!r}")


def _pick_viscous_scheme(choice, epsilon, alpha, dx):
    if choice != "auto":
        return choice
    # central differencing is monotone iff the cell Peclet number alpha dx / (2 eps) <= 1
    return "central" if 2.0 * epsilon >= alpha * dx else "godunov"


def step_viscous(f: Field, spec, epsilon, eta, dt, gradient="central", alpha=None) -> Field:
    """One forward-Euler step ``v + dt (eps Lap v - Hhat(v))``.

    With the default ``gradient='central'`` the Hamiltonian is evaluated at the
    central-difference gradient.  ``alpha`` is only used by ``'lf'``.
    """
    v = f.values
    dx = f.box.dx
    if alpha is None:
        alpha = 0.0 if isinstance(spec, NullH) else speed_bound(spec, eta, gradient_bound(v, dx))
    rhs = -_numerical_hamiltonian(gradient, spec, eta, v, dx, alpha)
    if epsilon:
        rhs = rhs + epsilon * laplacian_values(v, dx)
    with np.errstate(over="ignore", invalid="ignore"):
        new = v + dt * rhs
    bad = ~np.isfinite(new)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise StabilityError(f"non-finite value at node {node}", time=None, node=node)
    return Field(f.box, new)


def _integrate(phi: Field, spec, config: SolveConfig, eta, scheme, alpha_fixed=None) -> Trajectory:
    box = phi.box
    dx, dim = box.dx, box.dim
    eps = config.epsilon
    v = np.array(phi.values, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    is_null = isinstance(spec, NullH)

    traj = Trajectory(config=config, spec=spec, initial=phi)
    t = 0.0
    steps = 0
    for target in config.snapshot_times:
        while t < target:
            if alpha_fixed is not None:
                alpha = alpha_fixed
            elif is_null:
                alpha = 0.0
            else:
                alpha = speed_bound(spec, eta, config.alpha_margin * gradient_bound(v, dx))
            dt = _dt(dx, dim, eps, alpha, config.cfl_safety, config.t_end)
            last = t + dt >= target * (1.0 - 1e-13)
            if last:
                dt = target - t
            kind = scheme if eps == 0 else _pick_viscous_scheme(scheme, eps, alpha, dx)
            rhs = -_numerical_hamiltonian(kind, spec, eta, v, dx, alpha)
            if eps:
                rhs += eps * laplacian_values(v, dx)
            v = v + dt * rhs
            t = target if last else t + dt
            steps += 1
            if not np.all(np.isfinite(v)):
                node = tuple(int(i) for i in np.argwhere(~np.isfinite(v))[0])
                raise StabilityError(f"non-finite value at t={t:.6g}, node {node}", time=t, node=node)
            if steps > config.max_steps:
                raise BudgetError(f"step budget {config.max_steps} exhausted at t={t:.6g}")
        if np.min(v) < lo - tol or np.max(v) > hi + tol:
            node = tuple(int(i) for i in np.unravel_index(np.argmax(np.maximum(lo - v, v - hi)), v.shape))
            raise StabilityError(f"maximum principle broken at t={t:.6g}, node {node}", time=t, node=node)
        traj.snapshots.append((target, Field(box, v.copy())))
    traj.steps = steps
    return traj


def _resolve_eta(spec, config, box, inviscid):
    p = regime_exponent(spec)
    eta = config.eta
    if p is not None and p < 1 and eta == 0:
        if not inviscid:
            raise PreconditionError("p < 1 requires eta > 0 for the viscous solver")
        eta = box.dx
    return eta


def solve_viscous(phi: Field, spec, config: SolveConfig, alpha=None) -> Trajectory:
    """Integrate ``v_t - eps Lap v + Phi_eta(|grad v|^2) = 0`` to ``config.t_end``.

    Steps land exactly on the snapshot times.  Passing ``alpha`` freezes the
    speed bound (and hence the step sequence), which keeps two solves on
    identical steps.

    Raises
    ------
    StabilityError
        Non-finite values or a broken maximum principle.
    BudgetError
        More than ``config.max_steps`` steps.
    """
    if not config.epsilon > 0:
        raise PreconditionError("solve_viscous needs epsilon > 0")
    eta = _resolve_eta(spec, config, phi.box, inviscid=False)
    return _integrate(phi, spec, config, eta, config.gradient, alpha_fixed=alpha)


def solve_inviscid_lf(phi: Field, spec, config: SolveConfig, alpha=None) -> Trajectory:
    """Monotone scheme for ``v_t + H(|grad v|) = 0`` (``config.epsilon`` must be 0).

    ``config.flux`` chooses Lax-Friedrichs (default) or Godunov.  For p < 1
    with ``eta = 0`` the regularization parameter is tied to the grid,
    ``eta = dx``; the trajectory's config records the value used.
    """
    if config.epsilon != 0:
        raise PreconditionError("solve_inviscid_lf needs epsilon = 0")
    eta = _resolve_eta(spec, config, phi.box, inviscid=True)
    if eta != config.eta:
        config = replace(config, eta=eta)
    return _integrate(phi, spec, config, eta, config.flux, alpha_fixed=alpha)


# ---------------------------------------------------------------------------
# Hopf-Lax


def _lagrangian(p, s):
    return (p - 1.0) * p ** (-p / (p - 1.0)) * s ** (p / (p - 1.0))


def hopf_lax_oracle(phi: Field, t: float, p: float, chunk: int = 256) -> Field:
    """Brute-force ``min_y phi(y) + t L(|x - y|/t)`` over all grid nodes y.

    ``L`` is the convex conjugate of ``r -> r^p``; distances are periodic.
    """
    if not p > 1:
        raise UnsupportedRegimeError("the Hopf-Lax oracle needs a convex Hamiltonian, p > 1")
    if not t > 0:
        raise DomainError("t must be positive")
    box = phi.box
    coords = [c.ravel() for c in box.coords()]
    vals = phi.values.ravel()
    n = vals.size
    out = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        sq = 0.0
        for c in coords:
            d = periodic_distance(c[start:stop, None], c[None, :], box.side_length)
            sq = sq + d * d
        cost = t * _lagrangian(p, np.sqrt(sq) / t)
        out[start:stop] = np.min(vals[None, :] + cost, axis=1)
    return Field(box, out.reshape(box.shape))


# ---------------------------------------------------------------------------
# serialization


def save_trajectory(traj: Trajectory, directory) -> Path:
    """One CSV per snapshot plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    field_to_csv(traj.initial, d / "initial.csv")
    files = []
    for k, (_, f) in enumerate(traj.snapshots):
        name = f"snapshot_{k:04d}.csv"
        field_to_csv(f, d / name)
        files.append(name)
    box = traj.box
    manifest = {
        "epsilon": traj.config.epsilon,
        "eta": traj.config.eta,
        "spec": spec_to_dict(traj.spec),
        "times": [float(t) for t in traj.times],
        "sup_norm": traj.initial_sup,
        "resolution": box.resolution,
        "dim": box.dim,
        "side_length": box.side_length,
        "steps": traj.steps,
        "files": files,
        "config": traj.config.to_dict(),
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return d


def load_trajectory(directory) -> Trajectory:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    box = Box(manifest["dim"], manifest["side_length"], manifest["resolution"])
    config = SolveConfig(**manifest["config"])
    spec = spec_from_dict(manifest["spec"])
    initial = field_from_csv(d / "initial.csv", box)
    snaps = [(t, field_from_csv(d / name, box)) for t, name in zip(manifest["times"], manifest["files"])]
    return Trajectory(config=config, spec=spec, initial=initial, snapshots=snaps, steps=manifest.get("steps", 0))
