"""Experiment description files.

An experiment is an INI file (``configparser`` grammar: ``[section]`` headers,
``key = value`` lines, ``#`` or ``;`` comments).  Lists are comma separated;
numeric lists also accept ``linspace(a, b, n)`` and ``geomspace(a, b, n)``.

::

    [hamiltonian]
    kind = pure_power          # pure_power | power_sum | power_plus_shifted | null
    p = 2                      # pure_power; a list is allowed for `certify`
    terms = 1:2, 1:3           # power_sum, mu:p pairs
    q = 2                      # power_plus_shifted: p, q, r0, lam
    r0 = 1

    [box]
    dim = 1
    side_length = 2pi          # a float, optionally followed by `pi`
    resolution = 512

    [initial]
    preset = cosine            # any other key is a preset parameter
    A = 1

    [solve]
    epsilon = 0.05             # 0 selects the inviscid monotone scheme
    t_end = 5                  # default: last snapshot
    snapshot_times = geomspace(0.1, 5, 16)
    derivative_spacing = 1e-3  # adds t +- spacing/2 around each snapshot time
    eta, cfl_safety, alpha_margin, max_steps, epsilon_ceiling, gradient, flux

    [audits]
    enabled = gradx, gradxind, dudtpl, dudtmn, vdt, t_minus_one, holder_t, ball_mass, heat_kernel
    gradx_slack = 0.05         # <bound_id>_slack overrides the default slack
    t_range = 0.05, 5
    vdt_flux = godunov
    rho = 1
    t_minus_one_window = 1, 5
    holder_time = 0.5
    holder_h = 0.01, 0.02, 0.04, 0.08
    ball_center = 0
    ball_radii = 0.5, 1, 2
    ball_pairs = 0.1:1
    ball_ceiling = 10
    heat_tolerance = 1e-3

    [sweep]
    kind = vanishing_viscosity # | comparison | truncation
    eps_list = 0.2, 0.1, 0.05, 0.025
    window_times = 0.5, 1, 2
    inner_fraction = 0.5
    reference_refine = 4
    slope_min = 0.4
    lo = cone: A=1, r0=1       # comparison data, `preset: key=value, ...`
    hi = bump: A=2, r0=1.5     # or `hi_shift = c` for hi = lo + c
    growth_q = 1               # truncation data min(q |x|^s, n)
    growth_s = 1
    n_list = 1, 2, 4, 8
    min_ratio = 2

    [output]
    dir = out/thm1_p2
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, HJError
from .evolve import SolveConfig
from .field import PRESETS, Box
from .hamiltonian import NullH, PowerPlusShifted, PowerSum, PurePower

__all__ = ["ExperimentConfig", "AuditConfig", "SweepConfig", "load_config", "bundled_presets", "resolve_config_path"]

AUDIT_IDS = ("gradx", "gradxind", "dudtpl", "dudtmn", "vdt", "t_minus_one", "holder_t", "ball_mass", "heat_kernel")
DEFAULT_SLACK = {
    "gradx": 0.05, "gradxind": 0.05, "dudtpl": 0.10, "dudtmn": 0.10, "vdt": 0.10,
    "t_minus_one": 0.0, "holder_t": 0.0, "ball_mass": 0.0, "heat_kernel": 0.0,
}
SECTIONS = ("hamiltonian", "box", "initial", "solve", "audits", "sweep", "output")


@dataclass
class AuditConfig:
    enabled: tuple = ()
    slack: dict = field(default_factory=lambda: dict(DEFAULT_SLACK))
    t_range: tuple | None = None
    vdt_flux: str = "godunov"
    rho: float = 1.0
    t_minus_one_window: tuple | None = None
    holder_time: float | None = None
    holder_h: tuple = ()
    ball_center: tuple = (0.0,)
    ball_radii: tuple = ()
    ball_pairs: tuple = ()
    ball_ceiling: float = 10.0
    heat_tolerance: float = 1e-3


@dataclass
class SweepConfig:
    kind: str
    eps_list: tuple = ()
    window_times: tuple = ()
    inner_fraction: float = 0.5
    reference_refine: int = 1
    slope_min: float = 0.4
    lo: tuple | None = None
    hi: tuple | None = None
    hi_shift: float | None = None
    growth_q: float = 1.0
    growth_s: float = 1.0
    n_list: tuple = ()
    min_ratio: float = 2.0


@dataclass
class ExperimentConfig:
    path: Path
    specs: list
    box: Box | None
    preset: str | None
    preset_params: dict
    solve: SolveConfig | None
    derivative_spacing: float | None
    audits: AuditConfig
    sweep: SweepConfig | None
    output_dir: Path

    @property
    def spec(self):
        if len(self.specs) != 1:
            raise ConfigError(f"{self.path}: [hamiltonian] lists {len(self.specs)} exponents; solving needs exactly one")
        return self.specs[0]

    def require_solve(self):
        if self.box is None or self.preset is None or self.solve is None:
            raise ConfigError(f"{self.path}: sections [box], [initial] and [solve] are required for solving")


class _Reader:
    """Typed access to a parsed file with line-numbered diagnostics."""

    def __init__(self, cp: configparser.ConfigParser, path: Path, text: str):
        self.cp = cp
        self.path = path
        self.lines = text.splitlines()
        self.used = {s: set() for s in cp.sections()}

    def line_of(self, section, key=None):
        cur = None
        for k, raw in enumerate(self.lines, 1):
            s = raw.strip()
            m = re.match(r"^\[(.+)\]$", s)
            if m:
                cur = m.group(1).strip().lower()
                if key is None and cur == section:
                    return k
                continue
            if cur == section and key is not None:
                m = re.match(r"^([^=:#;]+?)\s*[=:]", s)
                if m and m.group(1).strip().lower() == key:
                    return k
        return None

    def fail(self, section, key, msg):
        line = self.line_of(section, key)
        where = f"line {line}, " if line else ""
        name = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{self.path}: {where}{name}: {msg}")

    def has(self, section, key=None):
        if key is None:
            return self.cp.has_section(section)
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None, required=False):
        if not self.cp.has_option(section, key):
            if required:
                self.fail(section, None, f"missing required key {key!r}")
            return default
        self.used[section].add(key)
        return self.cp.get(section, key).strip()

    def float(self, section, key, default=None, required=False, lo=None, hi=None, lo_open=False):
        s = self.raw(section, key, required=required)
        if s is None:
            return default
        val = _parse_float(s)
        if val is None:
            self.fail(section, key, f"expected a number, got {s!r}")
        if lo is not None and (val < lo or (lo_open and val == lo)):
            self.fail(section, key, f"value {val} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and val > hi:
            self.fail(section, key, f"value {val} must be <= {hi}")
        return val

    def int(self, section, key, default=None, required=False, lo=None):
        val = self.float(section, key, default=None, required=required)
        if val is None:
            return default
        if val != int(val):
            self.fail(section, key, f"expected an integer, got {val}")
        if lo is not None and val < lo:
            self.fail(section, key, f"value {int(val)} must be >= {lo}")
        return int(val)

    def floats(self, section, key, default=(), required=False):
        s = self.raw(section, key, required=required)
        if s is None:
            return None if default is None else tuple(default)
        vals = _parse_float_list(s)
        if vals is None:
            self.fail(section, key, f"expected a list of numbers, got {s!r}")
        return tuple(vals)

    def words(self, section, key, default=()):
        s = self.raw(section, key)
        if s is None:
            return tuple(default)
        return tuple(w.strip() for w in s.split(",") if w.strip())

    def pairs(self, section, key):
        s = self.raw(section, key)
        if s is None:
            return ()
        out = []
        for item in s.split(","):
            parts = item.split(":")
            vals = [_parse_float(x) for x in parts]
            if len(parts) != 2 or None in vals:
                self.fail(section, key, f"expected `a:b` pairs, got {item.strip()!r}")
            out.append(tuple(vals))
        return tuple(out)

    def check_unused(self):
        for section in self.cp.sections():
            extra = set(self.cp.options(section)) - self.used.get(section, set())
            if extra:
                self.fail(section, sorted(extra)[0], "unknown key")


def _parse_float(s):
    s = s.strip().lower()
    m = re.fullmatch(r"([-+0-9.e]*)\s*\*?\s*pi", s)
    try:
        if m:
            coef = m.group(1)
            return (float(coef) if coef not in ("", "+") else (-1.0 if coef == "-" else 1.0)) * np.pi
        return float(s)
    except ValueError:
        return None


def _parse_float_list(s):
    s = s.strip()
    m = re.fullmatch(r"(linspace|geomspace)\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)", s)
    if m:
        a, b, n = (_parse_float(x) for x in m.group(2, 3, 4))
        if None in (a, b, n) or n != int(n) or n < 1:
            return None
        if m.group(1) == "geomspace" and (a <= 0 or b <= 0):
            return None
        fn = np.linspace if m.group(1) == "linspace" else np.geomspace
        return [float(x) for x in fn(a, b, int(n))]
    vals = [_parse_float(x) for x in s.split(",") if x.strip()]
    return None if None in vals or not vals else vals


def _parse_data(reader, section, key):
    """``preset: key=value, ...`` -> (preset, params)."""
    s = reader.raw(section, key)
    if s is None:
        return None
    name, _, rest = s.partition(":")
    name = name.strip()
    if name not in PRESETS:
        reader.fail(section, key, f"unknown initial preset {name!r} (known: {', '.join(sorted(PRESETS))})")
    params = {}
    for item in rest.split(","):
        if not item.strip():
            continue
        k, eq, v = item.partition("=")
        val = _parse_float(v)
        if not eq or val is None:
            reader.fail(section, key, f"expected key=value, got {item.strip()!r}")
        params[k.strip()] = val
    return name, params


def bundled_presets() -> list:
    root = resources.files("hjdecay") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_config_path(name_or_path) -> Path:
    """A file path, or the name of a bundled preset such as ``thm1_p2``."""
    p = Path(name_or_path)
    if p.exists():
        return p
    if p.suffix == "" and str(name_or_path) in bundled_presets():
        return Path(str(resources.files("hjdecay") / "presets" / f"{name_or_path}.ini"))
    raise ConfigError(f"config file {name_or_path!r} not found (bundled presets: {', '.join(bundled_presets())})")


def _hamiltonians(r):
    sec = "hamiltonian"
    if not r.has(sec):
        r.fail(sec, None, "section is missing")
    kind = r.raw(sec, "kind", "pure_power")
    if kind == "pure_power":
        return [PurePower(p) for p in r.floats(sec, "p", required=True)]
    if kind == "power_sum":
        terms = r.pairs(sec, "terms")
        if not terms:
            r.fail(sec, "terms", "power_sum needs at least one mu:p term")
        return [PowerSum(terms)]
    if kind == "power_plus_shifted":
        return [PowerPlusShifted(
            p=r.float(sec, "p", required=True),
            q=r.float(sec, "q", required=True),
            r0=r.float(sec, "r0", required=True),
            lam=r.float(sec, "lam", 1.0),
        )]
    if kind == "null":
        return [NullH()]
    r.fail(sec, "kind", f"unknown Hamiltonian kind {kind!r}")


def _solve_section(r, box):
    sec = "solve"
    times = r.floats(sec, "snapshot_times", required=True)
    spacing = r.float(sec, "derivative_spacing", None, lo=0.0, lo_open=True)
    kw = {}
    for key in ("eta", "cfl_safety", "alpha_margin", "epsilon_ceiling"):
        v = r.float(sec, key)
        if v is not None:
            kw[key] = v
    v = r.int(sec, "max_steps", lo=1)
    if v is not None:
        kw["max_steps"] = v
    for key in ("gradient", "flux"):
        v = r.raw(sec, key)
        if v is not None:
            kw[key] = v
    eps = r.float(sec, "epsilon", required=True, lo=0.0)
    t_end = r.float(sec, "t_end", None, lo=0.0, lo_open=True)
    return times, spacing, eps, t_end, kw


def _audits(r, dim):
    sec = "audits"
    a = AuditConfig()
    if not r.has(sec):
        return a
    a.enabled = r.words(sec, "enabled")
    for name in a.enabled:
        if name not in AUDIT_IDS:
            r.fail(sec, "enabled", f"unknown audit {name!r} (known: {', '.join(AUDIT_IDS)})")
    for name in AUDIT_IDS:
        v = r.float(sec, f"{name}_slack", None, lo=0.0)
        if v is not None:
            a.slack[name] = v
    tr = r.floats(sec, "t_range", None)
    if tr is not None and (len(tr) != 2 or tr[0] > tr[1]):
        r.fail(sec, "t_range", "expected `t_min, t_max`")
    a.t_range = tr
    a.vdt_flux = r.raw(sec, "vdt_flux", "godunov")
    if a.vdt_flux not in ("lf", "godunov"):
        r.fail(sec, "vdt_flux", "must be lf or godunov")
    a.rho = r.float(sec, "rho", 1.0, lo=0.0, lo_open=True)
    w = r.floats(sec, "t_minus_one_window", None)
    if w is not None and (len(w) != 2 or w[0] >= w[1]):
        r.fail(sec, "t_minus_one_window", "expected `t_min, t_max`")
    a.t_minus_one_window = w
    a.holder_time = r.float(sec, "holder_time", None, lo=0.0, lo_open=True)
    a.holder_h = r.floats(sec, "holder_h", ())
    if any(not 0 < h < 1 for h in a.holder_h):
        r.fail(sec, "holder_h", "every h must lie in (0, 1)")
    a.ball_center = r.floats(sec, "ball_center", (0.0,) * dim)
    if len(a.ball_center) != dim:
        r.fail(sec, "ball_center", f"needs {dim} coordinates")
    a.ball_radii = r.floats(sec, "ball_radii", ())
    a.ball_pairs = r.pairs(sec, "ball_pairs")
    a.ball_ceiling = r.float(sec, "ball_ceiling", 10.0, lo=0.0)
    a.heat_tolerance = r.float(sec, "heat_tolerance", 1e-3, lo=0.0)
    if "holder_t" in a.enabled and (a.holder_time is None or not a.holder_h):
        r.fail(sec, "holder_time", "the holder_t audit needs holder_time and holder_h")
    if "ball_mass" in a.enabled and (not a.ball_radii or not a.ball_pairs):
        r.fail(sec, "ball_radii", "the ball_mass audit needs ball_radii and ball_pairs")
    return a


def _sweep(r):
    sec = "sweep"
    if not r.has(sec):
        return None
    kind = r.raw(sec, "kind", required=True)
    if kind not in ("vanishing_viscosity", "comparison", "truncation"):
        r.fail(sec, "kind", f"unknown sweep kind {kind!r}")
    s = SweepConfig(kind=kind)
    s.eps_list = r.floats(sec, "eps_list", ())
    s.window_times = r.floats(sec, "window_times", ())
    s.inner_fraction = r.float(sec, "inner_fraction", 0.5, lo=0.0, hi=1.0, lo_open=True)
    s.reference_refine = r.int(sec, "reference_refine", 1, lo=1)
    s.slope_min = r.float(sec, "slope_min", 0.4)
    s.lo = _parse_data(r, sec, "lo")
    s.hi = _parse_data(r, sec, "hi")
    s.hi_shift = r.float(sec, "hi_shift", None, lo=0.0)
    s.growth_q = r.float(sec, "growth_q", 1.0, lo=0.0)
    s.growth_s = r.float(sec, "growth_s", 1.0, lo=0.0, lo_open=True)
    s.n_list = r.floats(sec, "n_list", ())
    s.min_ratio = r.float(sec, "min_ratio", 2.0, lo=1.0)
    if kind == "vanishing_viscosity":
        if len(s.eps_list) < 3:
            r.fail(sec, "eps_list", "needs at least 3 values")
        if any(b >= a for a, b in zip(s.eps_list, s.eps_list[1:])):
            r.fail(sec, "eps_list", "must be strictly decreasing")
    if kind in ("vanishing_viscosity", "truncation") and not s.window_times:
        r.fail(sec, "window_times", f"required for a {kind} sweep")
    if kind == "comparison" and (s.lo is None or (s.hi is None and s.hi_shift is None)):
        r.fail(sec, "lo", "comparison needs `lo` and either `hi` or `hi_shift`")
    if kind == "truncation" and len(s.n_list) < 2:
        r.fail(sec, "n_list", "needs at least two levels")
    return s


def load_config(name_or_path, output_dir=None) -> ExperimentConfig:
    """Parse and validate an experiment file; every error is a :class:`ConfigError`."""
    path = resolve_config_path(name_or_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc})") from None
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    r = _Reader(cp, path, text)
    for sec in cp.sections():
        if sec not in SECTIONS:
            r.fail(sec, None, f"unknown section (known: {', '.join(SECTIONS)})")

    try:
        specs = _hamiltonians(r)
        box = None
        if r.has("box"):
            box = Box(
                r.int("box", "dim", 1),
                r.float("box", "side_length", required=True, lo=0.0, lo_open=True),
                r.int("box", "resolution", required=True, lo=16),
            )
        dim = box.dim if box else 1
        preset, params = None, {}
        if r.has("initial"):
            preset = r.raw("initial", "preset", required=True)
            if preset not in PRESETS:
                r.fail("initial", "preset", f"unknown initial preset {preset!r} (known: {', '.join(sorted(PRESETS))})")
            for key in cp.options("initial"):
                if key == "preset":
                    continue
                params[key if key != "a" else "A"] = r.float("initial", key, required=True)
        solve, spacing = None, None
        audits = _audits(r, dim)
        if r.has("solve"):
            times, spacing, eps, t_end, kw = _solve_section(r, box)
            times = set(times)
            if spacing:
                times |= {t + sgn * spacing / 2 for t in list(times) for sgn in (-1, 1)}
            if "holder_t" in audits.enabled:
                times |= {audits.holder_time} | {audits.holder_time + h for h in audits.holder_h}
            if "ball_mass" in audits.enabled:
                times |= {x for pair in audits.ball_pairs for x in pair}
            times = sorted(round(t, 12) for t in times if t > 0)
            t_end = t_end if t_end is not None else times[-1]
            try:
                solve = SolveConfig(epsilon=eps, t_end=t_end, snapshot_times=tuple(times), **kw)
            except HJError as exc:
                r.fail("solve", None, str(exc))
        sweep = _sweep(r)
        out = r.raw("output", "dir", None) if r.has("output") else None
        if output_dir is not None:
            out = output_dir
        out = Path(out) if out else Path("hjdecay_out") / path.stem
        r.check_unused()
    except ConfigError:
        raise
    except HJError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig(path, specs, box, preset, params, solve, spacing, audits, sweep, out)
