"""Uniform grids, trapezoidal quadrature, finite differences and Sobolev norms.

Every other module works with the two immutable containers defined here:
a :class:`Grid` describing a uniform lattice on a truncated half-line or on
a symmetric window of the real line, and a :class:`Field` of real samples
on such a grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_POINTS = 16


class Side(str, enum.Enum):
    """Domain tag for a grid."""

    RIGHT = "right"
    LEFT = "left"
    FULL = "full"

    @classmethod
    def parse(cls, value: "Side | str") -> "Side":
        if isinstance(value, Side):
            return value
        key = str(value).strip().lower()
        aliases = {
            "right": cls.RIGHT, "righthalfline": cls.RIGHT, "r": cls.RIGHT,
            "left": cls.LEFT, "lefthalfline": cls.LEFT, "l": cls.LEFT,
            "full": cls.FULL, "fullline": cls.FULL, "f": cls.FULL,
        }
        try:
            return aliases[key.replace("_", "").replace("-", "")]
        except KeyError:
            raise ValueError(f"unknown side {value!r}") from None


@dataclass(frozen=True)
class Grid:
    """Uniform lattice ``x_k = x_min + k*h`` for ``k = 0 .. n_points-1``."""

    side: Side
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < MIN_POINTS:
            raise ValueError(f"n_points must be >= {MIN_POINTS}, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.side is Side.RIGHT and self.x_min != 0.0:
            raise ValueError("right half-line grids start at 0")
        if self.side is Side.LEFT and self.x_max != 0.0:
            raise ValueError("left half-line grids end at 0")
        if self.side is Side.FULL and self.x_min != -self.x_max:
            raise ValueError("full-line grids are symmetric about 0")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def extent(self) -> float:
        return self.x_max if self.side is not Side.LEFT else -self.x_min

    @property
    def x(self) -> np.ndarray:
        xs = self.x_min + np.arange(self.n_points) * self.h
        xs[-1] = self.x_max
        return xs

    @property
    def origin_index(self) -> int:
        """Index of the node at ``x = 0``."""
        if self.side is Side.RIGHT:
            return 0
        if self.side is Side.LEFT:
            return self.n_points - 1
        return int(np.argmin(np.abs(self.x)))

    def describe(self) -> dict:
        return {
            "side": self.side.value,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_points": self.n_points,
            "h": self.h,
        }


def make_grid(side: Side | str, extent: float, n_points: int) -> Grid:
    """Build the grid for ``side`` truncated at distance ``extent`` from 0.

    Examples
    --------
    >>> make_grid("right", 40.0, 4001).h
    0.01
    """
    side = Side.parse(side)
    extent = float(extent)
    if not np.isfinite(extent) or extent <= 0:
        raise ValueError(f"extent must be positive, got {extent}")
    n_points = int(n_points)
    if n_points < MIN_POINTS:
        raise ValueError(f"n_points must be >= {MIN_POINTS}, got {n_points}")
    if side is Side.RIGHT:
        return Grid(side, 0.0, extent, n_points)
    if side is Side.LEFT:
        return Grid(side, -extent, 0.0, n_points)
    return Grid(side, -extent, extent, n_points)


def points_for_spacing(side: Side | str, extent: float, h: float) -> int:
    """Number of nodes giving spacing as close as possible to ``h``."""
    span = extent * (2.0 if Side.parse(side) is Side.FULL else 1.0)
    return int(round(span / h)) + 1


@dataclass(frozen=True)
class Field:
    """Real samples on a grid. Values are copied and made read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 1 or v.shape[0] != self.grid.n_points:
            raise ValueError(
                f"expected {self.grid.n_points} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + _values_on(self.grid, other))

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - _values_on(self.grid, other))

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


def _values_on(grid: Grid, other: Field) -> np.ndarray:
    if other.grid != grid:
        raise ValueError("fields live on different grids")
    return other.values


def zeros(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.n_points))


def from_function(grid: Grid, fn) -> Field:
    return Field(grid, fn(grid.x))


# ---------------------------------------------------------------- quadrature

def trapezoid(values: np.ndarray, h: float) -> float:
    """Composite trapezoid rule on uniformly spaced samples."""
    v = np.asarray(values, dtype=float)
    return float(h * (v.sum() - 0.5 * (v[0] + v[-1])))


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def quadrature(f: Field) -> float:
    """Trapezoidal approximation of the integral of ``f`` over its grid."""
    return trapezoid(f.values, f.grid.h)


# ---------------------------------------------------------- finite differences

# One-sided stencils for the first nodes; the last nodes use the mirror image
# (reversed offsets, sign (-1)**order).
_D1_EDGE = np.array([-3.0, 4.0, -1.0]) / 2.0
_D2_EDGE = np.array([2.0, -5.0, 4.0, -1.0])
_D3_EDGE0 = np.array([-5.0, 18.0, -24.0, 14.0, -3.0]) / 2.0
_D3_EDGE1 = np.array([-3.0, 10.0, -12.0, 6.0, -1.0]) / 2.0
_STENCIL_WIDTH = {1: 3, 2: 4, 3: 5}


def diff_values(u: np.ndarray, h: float, order: int) -> np.ndarray:
    """Second-order finite difference of ``u`` of the given order.

    Central stencils in the interior; one-sided stencils of matching order
    at the boundary nodes.
    """
    if order not in _STENCIL_WIDTH:
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    if n < _STENCIL_WIDTH[order] + 2:
        raise ValueError("grid too small for stencil")
    r = np.empty(n)
    if order == 1:
        r[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        r[0] = _D1_EDGE @ u[:3] / h
        r[-1] = -(_D1_EDGE @ u[:-4:-1]) / h
    elif order == 2:
        r[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
        r[0] = _D2_EDGE @ u[:4] / (h * h)
        r[-1] = _D2_EDGE @ u[:-5:-1] / (h * h)
    else:
        h3 = h ** 3
        r[2:-2] = (-u[:-4] + 2.0 * u[1:-3] - 2.0 * u[3:-1] + u[4:]) / (2.0 * h3)
        r[0] = _D3_EDGE0 @ u[:5] / h3
        r[1] = _D3_EDGE1 @ u[:5] / h3
        r[-1] = -(_D3_EDGE0 @ u[:-6:-1]) / h3
        r[-2] = -(_D3_EDGE1 @ u[:-6:-1]) / h3
    return r


def derivative(f: Field, order: int) -> Field:
    """Finite-difference derivative of ``f`` (order 1, 2 or 3)."""
    return Field(f.grid, diff_values(f.values, f.grid.h, order))


def boundary_value(values: np.ndarray, h: float, order: int, at_end: bool) -> float:
    """One-sided derivative at the first (``at_end=False``) or last node."""
    u = np.asarray(values, dtype=float)
    if order == 0:
        return float(u[-1] if at_end else u[0])
    if order == 1:
        return float(-(_D1_EDGE @ u[:-4:-1]) / h if at_end else _D1_EDGE @ u[:3] / h)
    if order == 2:
        tail = u[:-5:-1] if at_end else u[:4]
        return float(_D2_EDGE @ tail / (h * h))
    raise ValueError(f"unsupported trace order {order}")


# ---------------------------------------------------------------------- norms

def norm(f: Field, kind: str = "H1") -> float:
    """Discrete L2 or H1 norm of ``f`` over its grid."""
    kind = kind.upper()
    sq = f.values ** 2
    if kind == "L2":
        pass
    elif kind == "H1":
        sq = sq + diff_values(f.values, f.grid.h, 1) ** 2
    else:
        raise ValueError(f"unknown norm kind {kind!r}")
    return float(np.sqrt(max(trapezoid(sq, f.grid.h), 0.0)))


def norm_split(f: Field, split: int, kind: str = "H1") -> float:
    """Norm of ``f`` as the sum over ``[x_0, x_split]`` and ``[x_split, x_end]``.

    Each piece is differenced with its own one-sided end stencils, so a kink
    at the split node (as left by a zero extension) is not smeared.
    """
    if not 0 < split < f.grid.n_points - 1:
        raise ValueError("split index must be interior")
    h = f.grid.h
    total = 0.0
    for part in (f.values[: split + 1], f.values[split:]):
        sq = part ** 2
        if kind.upper() == "H1":
            sq = sq + diff_values(part, h, 1) ** 2
        total += trapezoid(sq, h)
    return float(np.sqrt(max(total, 0.0)))


# ---------------------------------------------------------------- persistence

def write_field(f: Field, path: str | Path, label: str = "u") -> None:
    """Write ``f`` as two comma-separated columns with a ``# x u`` header."""
    data = np.column_stack([f.grid.x, f.values])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=f"x {label}", comments="# ")


def read_field(path: str | Path, side: Side | str | None = None) -> Field:
    """Read a field file back. The side is inferred from the endpoints."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    x, v = data[:, 0], data[:, 1]
    if side is None:
        if x[0] == 0.0:
            side = Side.RIGHT
        elif x[-1] == 0.0:
            side = Side.LEFT
        else:
            side = Side.FULL
    grid = make_grid(side, float(max(abs(x[0]), abs(x[-1]))), x.shape[0])
    return Field(grid, v)
