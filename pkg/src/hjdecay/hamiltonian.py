"""Hamiltonians H(r), their smooth regularizations and p-condition certificates.

Every supported Hamiltonian is a closed form built from power terms
``mu * r**p`` and, optionally, one shifted power ``lam * (r - r0)_+**q``.
The regularization used throughout is

    Phi_eta(s) = sum_k mu_k ((s + eta**2)**(p_k/2) - eta**p_k) + lam * G(sqrt(s)),

so that ``Phi_eta(r**2) -> H(r)`` as ``eta -> 0``.  The function

    Theta_eta(s) = 2 s Phi_eta'(s) - Phi_eta(s)

drives the gradient estimates; :func:`certify` returns constants
``(a, b, gamma)`` with ``Theta_eta(s) >= a s**(p/2) - b eta**gamma`` (p > 1) or
``Theta_eta(s) <= -a s**(p/2) + b eta**gamma`` (p < 1) and audits that
inequality on a sampling plan.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from .errors import CertificationError, DomainError, InvariantError, UnsupportedRegimeError

__all__ = [
    "PurePower",
    "PowerSum",
    "PowerPlusShifted",
    "NullH",
    "HamiltonianSpec",
    "AuditPlan",
    "PCertificate",
    "GrowthEnvelope",
    "EnvelopeAudit",
    "eval_h",
    "eval_phi_eta",
    "eval_theta_eta",
    "phi",
    "phi_prime",
    "theta",
    "speed",
    "speed_bound",
    "running_max_h",
    "regime_exponent",
    "certify",
    "power_constants",
    "derived_envelopes",
    "shifted_audit",
    "spec_to_dict",
    "spec_from_dict",
]


@dataclass(frozen=True)
class PurePower:
    """H(r) = r**p."""

    p: float

    def __post_init__(self):
        if not self.p > 0 or self.p == 1:
            raise InvariantError(f"PurePower needs p > 0, p != 1 (got p={self.p})")


@dataclass(frozen=True)
class PowerSum:
    """H(r) = sum_k mu_k r**p_k with all p_k in (0, 1) or all in (1, inf)."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(mu), float(p)) for mu, p in self.terms)
        if not terms:
            raise InvariantError("PowerSum needs at least one term")
        for mu, p in terms:
            if not mu > 0:
                raise InvariantError(f"PowerSum weight must be positive (got {mu})")
            if not p > 0 or p == 1:
                raise InvariantError(f"PowerSum exponent must be positive and != 1 (got {p})")
        below = [p < 1 for _, p in terms]
        if any(below) and not all(below):
            raise InvariantError("PowerSum exponents must all lie in (0,1) or all in (1,inf)")
        object.__setattr__(self, "terms", terms)


@dataclass(frozen=True)
class PowerPlusShifted:
    """H(r) = r**p + lam * (r - r0)_+**q with q >= p > 1."""

    p: float
    q: float
    r0: float
    lam: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise InvariantError(f"PowerPlusShifted needs p > 1 (got {self.p})")
        if not self.q >= self.p:
            raise InvariantError(f"PowerPlusShifted needs q >= p (got q={self.q}, p={self.p})")
        if not self.r0 > 0 or not self.lam > 0:
            raise InvariantError("PowerPlusShifted needs r0 > 0 and lam > 0")


@dataclass(frozen=True)
class NullH:
    """H = 0; only used to validate the solver against the heat equation."""


HamiltonianSpec = Union[PurePower, PowerSum, PowerPlusShifted, NullH]


def _power_terms(spec):
    if isinstance(spec, PurePower):
        return [(1.0, float(spec.p))]
    if isinstance(spec, PowerSum):
        return list(spec.terms)
    if isinstance(spec, PowerPlusShifted):
        return [(1.0, float(spec.p))]
    if isinstance(spec, NullH):
        return []
    raise TypeError(f"not a Hamiltonian spec: {spec!r}")


def _shifted(spec):
    if isinstance(spec, PowerPlusShifted):
        return float(spec.lam), float(spec.q), float(spec.r0)
    return None


def regime_exponent(spec) -> float | None:
    """The exponent p for which ``spec`` satisfies the p-condition (None for NullH)."""
    if isinstance(spec, NullH):
        return None
    exps = [p for _, p in _power_terms(spec)]
    return min(exps) if exps[0] > 1 else max(exps)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("H is only defined for r >= 0")
    return r


def _check_eta(eta, allow_zero=False):
    if eta < 0 or (eta == 0 and not allow_zero):
        raise DomainError(f"eta must be positive (got {eta})")


def eval_h(spec, r):
    """Exact value of H(r) for r >= 0."""
    r = _check_r(r)
    out = np.zeros_like(r)
    for mu, p in _power_terms(spec):
        out = out + mu * r**p
    sh = _shifted(spec)
    if sh is not None:
        lam, q, r0 = sh
        out = out + lam * np.maximum(r - r0, 0.0) ** q
    return out if out.ndim else float(out)


def phi(spec, eta, s):
    """Phi_eta(s) for eta >= 0; eta = 0 means ``H(sqrt(s))``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    e2 = eta * eta
    for mu, p in _power_terms(spec):
        if eta == 0:
            out = out + mu * s ** (0.5 * p)
        else:
            # (s + eta^2)^{p/2} - eta^p without cancellation; exactly 0 at s = 0
            out = out + mu * eta**p * np.expm1(0.5 * p * np.log1p(s / e2))
    sh = _shifted(spec)
    if sh is not None:
        lam, q, r0 = sh
        out = out + lam * np.maximum(np.sqrt(s) - r0, 0.0) ** q
    return out


def phi_prime(spec, eta, s):
    """Derivative of Phi_eta with respect to s (requires s > 0 when eta = 0 and p < 2)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    e2 = eta * eta
    for mu, p in _power_terms(spec):
        out = out + mu * 0.5 * p * (s + e2) ** (0.5 * p - 1.0)
    sh = _shifted(spec)
    if sh is not None:
        lam, q, r0 = sh
        root = np.sqrt(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(root > r0, lam * q * np.maximum(root - r0, 0.0) ** (q - 1.0) / (2.0 * root), 0.0)
        out = out + g
    return out


def theta(spec, eta, s):
    """Theta_eta(s) = 2 s Phi_eta'(s) - Phi_eta(s), from the analytic derivative."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    e2 = eta * eta
    for mu, p in _power_terms(spec):
        x = s + e2
        # p s X^{p/2-1} - X^{p/2} + eta^p, rewritten without s to avoid cancellation
        out = out + mu * ((p - 1.0) * x ** (0.5 * p) - p * e2 * x ** (0.5 * p - 1.0) + eta**p)
    sh = _shifted(spec)
    if sh is not None:
        lam, q, r0 = sh
        root = np.sqrt(s)
        d = np.maximum(root - r0, 0.0)
        out = out + lam * d ** (q - 1.0) * ((q - 1.0) * root + r0) * (root > r0)
    return out


def eval_phi_eta(spec, eta, r):
    """Regularized Hamiltonian Phi_eta(r); ``eta`` must be positive."""
    _check_eta(eta)
    r = _check_r(r)
    out = phi(spec, eta, r)
    return out if out.ndim else float(out)


def eval_theta_eta(spec, eta, r):
    """Theta_eta(r) = 2 r Phi_eta'(r) - Phi_eta(r); ``eta`` must be positive."""
    _check_eta(eta)
    r = _check_r(r)
    out = theta(spec, eta, r)
    return out if out.ndim else float(out)


def speed(spec, eta, r):
    """Lipschitz speed 2 r Phi_eta'(r**2) of q -> Phi_eta(|q|**2) at |q| = r."""
    r = _check_r(r)
    out = np.zeros_like(r)
    e2 = eta * eta
    for mu, p in _power_terms(spec):
        with np.errstate(divide="ignore", invalid="ignore"):
            term = mu * p * r * (r * r + e2) ** (0.5 * p - 1.0)
        out = out + np.where(r > 0, term, 0.0)
    sh = _shifted(spec)
    if sh is not None:
        lam, q, r0 = sh
        out = out + lam * q * np.maximum(r - r0, 0.0) ** (q - 1.0)
    return out


def speed_bound(spec, eta, r_max) -> float:
    """Upper bound for ``speed(spec, eta, r)`` over ``0 <= r <= r_max``.

    Exact for single-term Hamiltonians; for sums it adds the per-term maxima.
    """
    _check_eta(eta, allow_zero=True)
    if r_max < 0:
        raise DomainError("r_max must be nonnegative")
    if r_max == 0:
        return 0.0
    total = 0.0
    e2 = eta * eta
    for mu, p in _power_terms(spec):
        r = r_max
        if p < 1:
            if eta == 0:
                raise UnsupportedRegimeError("speed is unbounded near 0 for p < 1 unless eta > 0")
            r_star = eta / math.sqrt(1.0 - p)
            r = min(r_max, r_star)
        total += mu * p * r * (r * r + e2) ** (0.5 * p - 1.0)
    sh = _shifted(spec)
    if sh is not None:
        lam, q, r0 = sh
        total += lam * q * max(r_max - r0, 0.0) ** (q - 1.0)
    return float(total)


def running_max_h(spec, r, samples: int = 2049):
    """Q(r) = max_{0 <= s <= r} H(s), by dense sampling plus the endpoint."""
    r = float(r)
    if r < 0:
        raise DomainError("Q is only defined for r >= 0")
    s = np.linspace(0.0, r, samples)
    return float(np.max(eval_h(spec, s)))


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class AuditPlan:
    """Sampling plan for the p-condition audit: log-spaced r times a list of eta."""

    r_min: float = 1e-4
    r_max: float = 1e4
    n_r: int = 200
    etas: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    rel_slack: float = 1e-10

    def r_grid(self):
        return np.geomspace(self.r_min, self.r_max, self.n_r)


@dataclass(frozen=True)
class PCertificate:
    """Constants certifying the p-condition.

    ``b_summary`` carries the alternative value of ``b`` obtained from the
    exponent ``(p-2)/p`` for p > 2; the binding value in ``b`` uses ``(p-2)/2``.
    """

    p: float
    a: float
    b: float
    gamma: float
    direction: str
    audited: bool = False
    b_summary: float | None = None

    def __post_init__(self):
        want = "lower" if self.p > 1 else "upper"
        if self.direction != want:
            raise InvariantError(f"direction must be {want!r} for p={self.p}")
        if not (self.a > 0 and self.b > 0 and self.gamma > 0):
            raise InvariantError("a, b and gamma must be positive")

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "b_summary"}
        if self.b_summary is not None:
            d["b_summary"] = self.b_summary
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "PCertificate":
        return cls(
            p=float(d["p"]), a=float(d["a"]), b=float(d["b"]), gamma=float(d["gamma"]),
            direction=d["direction"], audited=bool(d.get("audited", False)),
            b_summary=d.get("b_summary"),
        )


def power_constants(p: float) -> tuple[float, float, float]:
    """Closed-form (a, b, gamma) for H(r) = r**p.

    >>> power_constants(2.0)
    (1.0, 1.0, 2.0)
    """
    if p == 1 or p <= 0:
        raise UnsupportedRegimeError(f"no p-condition constants for p={p}")
    if 1 < p <= 2:
        return p - 1.0, p - 1.0, p
    if p > 2:
        return (p - 1.0) / 2.0, 2.0 * (p - 2.0) ** ((p - 2.0) / 2.0), (p + 2.0) / 2.0
    return 1.0 - p, 1.0, p


def _certificate_constants(spec):
    p = regime_exponent(spec)
    terms = _power_terms(spec)
    mu_ext = next(mu for mu, pk in terms if pk == p)
    a0, b0, g0 = power_constants(p)
    a = mu_ext * a0
    b_summary = None
    if p > 1:
        # the remaining terms (and the shifted power) have Theta >= 0
        b, gamma = mu_ext * b0, g0
        if p > 2:
            b_summary = mu_ext * 2.0 * (p - 2.0) ** ((p - 2.0) / p)
    else:
        # every sublinear term can contribute up to +mu_k eta^{p_k} on top
        b = sum(mu * power_constants(pk)[1] for mu, pk in terms)
        gamma = min(power_constants(pk)[2] for _, pk in terms)
    return p, a, b, gamma, b_summary


def certify(spec, audit_grid: AuditPlan | None = None) -> PCertificate:
    """Return the p-condition constants for ``spec`` and audit them.

    Raises
    ------
    UnsupportedRegimeError
        For :class:`NullH`, which has no p.
    CertificationError
        If the inequality fails at some sample; carries ``r``, ``eta`` and
        the offending ``theta`` value.
    """
    if isinstance(spec, NullH):
        raise UnsupportedRegimeError("NullH is excluded from certification")
    plan = audit_grid or AuditPlan()
    p, a, b, gamma, b_summary = _certificate_constants(spec)
    r = plan.r_grid()
    for eta in plan.etas:
        th = theta(spec, eta, r)
        main = a * r ** (0.5 * p)
        tail = b * eta**gamma
        if p > 1:
            deficit = (main - tail) - th
        else:
            deficit = th - (tail - main)
        scale = np.abs(th) + main + tail
        bad = deficit > plan.rel_slack * scale
        if np.any(bad):
            i = int(np.argmax(bad))
            raise CertificationError(
                f"p-condition violated at r={r[i]:.6g}, eta={eta:.3g}: Theta={th[i]:.12g}",
                r=float(r[i]), eta=float(eta), theta=float(th[i]),
            )
    direction = "lower" if p > 1 else "upper"
    return PCertificate(p=p, a=a, b=b, gamma=gamma, direction=direction, audited=True, b_summary=b_summary)


# ---------------------------------------------------------------------------
# growth envelope


@dataclass(frozen=True)
class GrowthEnvelope:
    """H(r) <= g_H (r**kappa_inf + r**kappa0) with 0 < kappa_inf <= kappa0."""

    g_H: float
    kappa0: float
    kappa_inf: float

    def __post_init__(self):
        if not (self.g_H > 0 and 0 < self.kappa_inf <= self.kappa0):
            raise InvariantError("need g_H > 0 and 0 < kappa_inf <= kappa0")

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return self.g_H * (r**self.kappa_inf + r**self.kappa0)


@dataclass
class EnvelopeAudit:
    """Per-clause outcome of :func:`derived_envelopes`; ``None`` marks a skipped clause."""

    envelope_ok: bool
    exponents_ok: bool
    lower_bound_ok: bool
    running_max_ok: bool
    subadditive_ok: bool | None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        clauses = [self.envelope_ok, self.exponents_ok, self.lower_bound_ok, self.running_max_ok]
        if self.subadditive_ok is not None:
            clauses.append(self.subadditive_ok)
        return all(clauses)


def _envelope(spec) -> GrowthEnvelope:
    if isinstance(spec, PurePower):
        return GrowthEnvelope(1.0, spec.p, spec.p)
    if isinstance(spec, PowerSum):
        ps = [p for _, p in spec.terms]
        return GrowthEnvelope(sum(mu for mu, _ in spec.terms), max(ps), min(ps))
    if isinstance(spec, PowerPlusShifted):
        return GrowthEnvelope(max(1.0, spec.lam), spec.q, spec.p)
    raise UnsupportedRegimeError("NullH has no growth envelope")


def derived_envelopes(spec, cert: PCertificate, r_max: float = 10.0, samples: int = 201):
    """Growth envelope of ``spec`` plus a sampled audit of the derived properties.

    The audit checks, on ``samples`` points of ``[0, r_max]``:

    * ``H(r) <= g_H (r**kappa_inf + r**kappa0)`` and ``kappa_inf <= p <= kappa0``;
    * the lower bound ``H(r) >= a/|p-1| r**p``;
    * that the running maximum ``Q(r)`` coincides with ``H(r)``;
    * subadditivity ``H(r+s) <= H(r) + H(s)`` (only for p < 1, skipped otherwise).

    Returns
    -------
    (GrowthEnvelope, EnvelopeAudit)
    """
    if not r_max > 0 or samples < 2:
        raise DomainError("need r_max > 0 and samples >= 2")
    env = _envelope(spec)
    p = cert.p
    r = np.linspace(0.0, r_max, samples)
    h = eval_h(spec, r)
    tol = 1e-12 * np.maximum(1.0, np.abs(h))
    details = {}

    upper = env.evaluate(r)
    envelope_ok = bool(np.all(h <= upper + tol))
    exponents_ok = env.kappa_inf <= p <= env.kappa0

    lower = cert.a / abs(p - 1.0) * r**p
    lower_gap = h - lower
    lower_bound_ok = bool(np.all(lower_gap >= -tol))
    details["lower_bound_min_gap"] = float(np.min(lower_gap))

    q = np.maximum.accumulate(h)
    running_max_ok = bool(np.all(np.abs(q - h) <= tol))

    subadditive_ok = None
    if p < 1:
        rr, ss = np.meshgrid(r, r, indexing="ij")
        lhs = eval_h(spec, rr + ss)
        rhs = eval_h(spec, rr) + eval_h(spec, ss)
        gap = rhs - lhs
        subadditive_ok = bool(np.all(gap >= -1e-12 * np.maximum(1.0, rhs)))
        details["subadditive_min_gap"] = float(np.min(gap))

    audit = EnvelopeAudit(envelope_ok, exponents_ok, lower_bound_ok, running_max_ok, subadditive_ok, details)
    return env, audit


def spec_to_dict(spec) -> dict:
    """Serializable description: variant name plus numeric parameters."""
    if isinstance(spec, PurePower):
        return {"variant": "pure_power", "p": spec.p}
    if isinstance(spec, PowerSum):
        return {"variant": "power_sum", "terms": [list(t) for t in spec.terms]}
    if isinstance(spec, PowerPlusShifted):
        return {"variant": "power_plus_shifted", "p": spec.p, "q": spec.q, "r0": spec.r0, "lam": spec.lam}
    if isinstance(spec, NullH):
        return {"variant": "null"}
    raise TypeError(f"not a Hamiltonian spec: {spec!r}")


def spec_from_dict(d) -> HamiltonianSpec:
    variant = d.get("variant")
    if variant == "pure_power":
        return PurePower(float(d["p"]))
    if variant == "power_sum":
        return PowerSum(tuple(tuple(t) for t in d["terms"]))
    if variant == "power_plus_shifted":
        return PowerPlusShifted(float(d["p"]), float(d["q"]), float(d["r0"]), float(d.get("lam", 1.0)))
    if variant == "null":
        return NullH()
    raise InvariantError(f"unknown Hamiltonian variant {variant!r}")


def shifted_audit(spec: PowerPlusShifted, r_max: float = 100.0, samples: int = 2001) -> bool:
    """Check that the shifted part never lowers Theta: G(r)/r is nondecreasing past r0."""
    r = np.linspace(spec.r0, r_max, samples)[1:]
    lam, q, r0 = spec.lam, spec.q, spec.r0
    deriv = lam * (r - r0) ** (q - 1.0) * ((q - 1.0) * r + r0) / r**2
    return bool(np.all(deriv >= 0))

