"""Grid functions on a periodic box and the discrete operators used by the solvers.

Nodes sit at ``x_i = -L/2 + i * dx`` with ``dx = L / n`` on every axis, so the
origin and the antipode ``+-L/2`` are both nodes when ``n`` is even.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, GeometryError, InvariantError, ShapeError

__all__ = [
    "Box",
    "Field",
    "BallSpec",
    "PRESETS",
    "make_initial",
    "grad_mag_central",
    "one_sided_differences",
    "laplacian",
    "sup_metrics",
    "ball_integral",
    "periodic_distance",
    "field_to_csv",
    "field_from_csv",
]


@dataclass(frozen=True)
class Box:
    """Periodic box ``[-L/2, L/2)^dim`` sampled with ``resolution`` nodes per axis."""

    dim: int
    side_length: float
    resolution: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvariantError(f"dim must be 1 or 2 (got {self.dim})")
        if not self.side_length > 0:
            raise InvariantError("side_length must be positive")
        if int(self.resolution) != self.resolution or self.resolution < 16:
            raise InvariantError(f"resolution must be an integer >= 16 (got {self.resolution})")

    @property
    def dx(self) -> float:
        return self.side_length / self.resolution

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.dim

    def axis(self) -> np.ndarray:
        return -0.5 * self.side_length + self.dx * np.arange(self.resolution)

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays (``indexing='ij'``), one per axis."""
        ax = self.axis()
        if self.dim == 1:
            return [ax]
        return list(np.meshgrid(ax, ax, indexing="ij"))

    def radius(self, center=None) -> np.ndarray:
        """Periodic Euclidean distance of every node to ``center`` (default origin)."""
        center = np.zeros(self.dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
        sq = 0.0
        for x, c in zip(self.coords(), center):
            d = periodic_distance(x, c, self.side_length)
            sq = sq + d * d
        return np.sqrt(sq)

    def refine(self, factor: int) -> "Box":
        return Box(self.dim, self.side_length, self.resolution * factor)


def periodic_distance(x, y, length):
    """Distance between coordinates on a circle of circumference ``length``."""
    d = np.abs(np.asarray(x) - np.asarray(y)) % length
    return np.minimum(d, length - d)


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar node values on a :class:`Box`; the array is read-only."""

    box: Box
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.box.shape:
            raise ShapeError(f"values have shape {vals.shape}, box expects {self.box.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvariantError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "Field":
        return Field(self.box, values)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def restrict(self, box: Box) -> "Field":
        """Subsample onto a coarser box whose resolution divides this one."""
        if box.side_length != self.box.side_length or box.dim != self.box.dim:
            raise ShapeError("restriction needs the same physical box")
        factor, rem = divmod(self.box.resolution, box.resolution)
        if rem:
            raise ShapeError("coarse resolution must divide the fine one")
        sl = (slice(None, None, factor),) * box.dim
        return Field(box, self.values[sl])


# ---------------------------------------------------------------------------
# initial data


def _cosine(box, amplitude=1.0):
    x = box.coords()[0]
    return 0.5 * amplitude * (1.0 + np.cos(2.0 * np.pi * x / box.side_length))


def _bump(box, amplitude=1.0, r0=1.0):
    if r0 >= box.side_length / 2:
        raise GeometryError(f"bump radius r0={r0} must be below half the side length")
    rho = box.radius() / r0
    out = np.zeros(box.shape)
    inside = rho < 1.0
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - rho[inside] ** 2))
    return out


def _cone(box, amplitude=1.0, r0=1.0):
    if r0 >= box.side_length / 2:
        raise GeometryError(f"cone radius r0={r0} must be below half the side length")
    return amplitude * np.maximum(0.0, 1.0 - box.radius() / r0)


def _truncated_growth(box, q=1.0, s=1.0, n=np.inf):
    return np.minimum(q * box.radius() ** s, n)


def _constant(box, value=1.0):
    return np.full(box.shape, float(value))


PRESETS = {
    "cosine": _cosine,
    "bump": _bump,
    "cone": _cone,
    "truncated_growth": _truncated_growth,
    "constant": _constant,
}


def make_initial(preset: str, params: dict | None, box: Box) -> Field:
    """Build nonnegative bounded initial data from a named preset.

    Presets
    -------
    cosine            ``A (1 + cos(2 pi x / L)) / 2`` (varies along the first axis)
    bump              ``A exp(1 - 1/(1 - |x/r0|^2))`` inside ``|x| < r0``
    cone              ``A max(0, 1 - |x|/r0)``
    truncated_growth  ``min(q |x|^s, n)``
    constant          ``value`` everywhere
    """
    try:
        builder = PRESETS[preset]
    except KeyError:
        raise DomainError(f"unknown initial preset {preset!r}") from None
    params = dict(params or {})
    if "A" in params:
        params["amplitude"] = params.pop("A")
    if params.get("amplitude", 0.0) < 0:
        raise DomainError("amplitude must be nonnegative")
    return Field(box, builder(box, **params))


# ---------------------------------------------------------------------------
# operators


def one_sided_differences(values, dx):
    """Forward and backward differences along every axis, periodic wrap."""
    fwd, bwd = [], []
    for ax in range(values.ndim):
        fwd.append((np.roll(values, -1, axis=ax) - values) / dx)
        bwd.append((values - np.roll(values, 1, axis=ax)) / dx)
    return fwd, bwd


def grad_mag_central(f: Field) -> Field:
    """Node-wise |grad f| from second-order central differences."""
    v, dx = f.values, f.box.dx
    sq = np.zeros_like(v)
    for ax in range(v.ndim):
        d = (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2.0 * dx)
        sq += d * d
    return Field(f.box, np.sqrt(sq))


def laplacian_values(v, dx):
    out = -2.0 * v.ndim * v
    for ax in range(v.ndim):
        out = out + np.roll(v, -1, axis=ax) + np.roll(v, 1, axis=ax)
    return out / (dx * dx)


def laplacian(f: Field) -> Field:
    """Standard (2 dim + 1)-point Laplacian."""
    return Field(f.box, laplacian_values(f.values, f.box.dx))


def sup_metrics(f: Field, g: Field | None = None) -> dict:
    """``{'sup_norm': max|f|, 'sup_distance': max|f - g| or None}``."""
    out = {"sup_norm": f.sup, "sup_distance": None}
    if g is not None:
        if g.box != f.box:
            raise ShapeError("fields live on different boxes")
        out["sup_distance"] = float(np.max(np.abs(f.values - g.values)))
    return out


@dataclass(frozen=True)
class BallSpec:
    """Ball ``B_R(center)``; the doubled ball must not wrap around the box."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")

    def check_fits(self, box: Box):
        if len(self.center) != box.dim:
            raise GeometryError(f"ball center has {len(self.center)} coordinates, box has dim {box.dim}")
        if not 2.0 * self.radius < box.side_length / 2.0:
            raise GeometryError(
                f"ball radius {self.radius} too large: need 2R < L/2 = {box.side_length / 2}"
            )

    def doubled(self) -> "BallSpec":
        return BallSpec(self.center, 2.0 * self.radius)


def ball_integral(f: Field, ball: BallSpec) -> float:
    """Riemann sum of ``f`` over nodes at periodic distance < R from the center."""
    if len(ball.center) != f.box.dim:
        raise GeometryError(f"ball center has {len(ball.center)} coordinates, box has dim {f.box.dim}")
    if not ball.radius <= f.box.side_length / 2.0:
        raise GeometryError(f"ball radius {ball.radius} wraps around the box")
    mask = f.box.radius(ball.center) < ball.radius
    return float(np.sum(f.values[mask]) * f.box.dx**f.box.dim)


# ---------------------------------------------------------------------------
# CSV


def field_to_csv(f: Field, path) -> None:
    """Write one row per node: index per axis, coordinate per axis, value."""
    box = f.box
    ax = box.axis()
    names = ["i", "j"][: box.dim]
    header = names + ["x", "y"][: box.dim] + ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for idx in itertools.product(range(box.resolution), repeat=box.dim):
            w.writerow([*idx, *(repr(float(ax[k])) for k in idx), repr(float(f.values[idx]))])


def field_from_csv(path, box: Box) -> Field:
    vals = np.zeros(box.shape)
    with open(Path(path), newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            idx = tuple(int(c) for c in row[: box.dim])
            vals[idx] = float(row[-1])
    return Field(box, vals)
