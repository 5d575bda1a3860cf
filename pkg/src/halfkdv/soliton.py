"""Closed-form KdV soliton ``(3c/2) sech^2(sqrt(c) s / 2)`` and related integrals.

All derivatives here are analytic. With ``A = 3c/2``, ``k = sqrt(c)/2``,
``S = sech^2(k s)`` and ``T = tanh(k s)``::

    Q   = A S
    Q'  = -2 A k S T
    Q'' = A k^2 (4 S - 6 S^2)
    Q''' = -2 A k^3 S T (4 - 12 S)

Half-line integrals of the profile reduce, after ``t = tanh(k s)``, to
polynomials in ``eps = 1 - tanh(k a)``, which we evaluate as
``2 expit(-2 k a)`` so that large ``a`` loses no digits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .grid import Field, Grid

SECH_CLAMP = 350.0


@dataclass(frozen=True)
class SolitonParams:
    """Speed ``c > 0`` and the center ``shift`` of the profile."""

    c: float
    shift: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"soliton speed must be positive, got {self.c}")
        if not np.isfinite(self.shift):
            raise ValueError("shift must be finite")

    @property
    def amplitude(self) -> float:
        return 1.5 * self.c

    @property
    def wavenumber(self) -> float:
        return 0.5 * np.sqrt(self.c)


def sech(s):
    """``2 / (e^s + e^-s)`` with exact zero once ``|s| > 350``."""
    s = np.asarray(s, dtype=float)
    a = np.minimum(np.abs(s), SECH_CLAMP)
    out = 2.0 / (np.exp(a) + np.exp(-a))
    return np.where(np.abs(s) > SECH_CLAMP, 0.0, out)


def _parts(c: float, s):
    A = 1.5 * c
    k = 0.5 * np.sqrt(c)
    ks = k * np.asarray(s, dtype=float)
    S = sech(ks) ** 2
    T = np.tanh(ks)
    return A, k, S, T


def profile_values(c: float, s, order: int = 0) -> np.ndarray:
    """Profile or its analytic derivative (order 0 to 3) at offsets ``s``."""
    A, k, S, T = _parts(c, s)
    if order == 0:
        return A * S
    if order == 1:
        return -2.0 * A * k * S * T
    if order == 2:
        return A * k * k * (4.0 * S - 6.0 * S * S)
    if order == 3:
        return -2.0 * A * k ** 3 * S * T * (4.0 - 12.0 * S)
    raise ValueError(f"derivative order must be 0..3, got {order}")


def profile(p: SolitonParams, g: Grid) -> Field:
    """Samples of ``Q_c(x - shift)`` on ``g`` (the restriction on half-lines)."""
    return Field(g, profile_values(p.c, g.x - p.shift))


def profile_derivative(p: SolitonParams, g: Grid, order: int) -> Field:
    """Analytic first or second derivative of the profile on ``g``."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return Field(g, profile_values(p.c, g.x - p.shift, order))


def ode_residual(p: SolitonParams, g: Grid) -> float:
    """Max over ``g`` of ``|Q'' - cQ + Q^2|`` with analytic derivatives."""
    s = g.x - p.shift
    q = profile_values(p.c, s)
    q2 = profile_values(p.c, s, 2)
    return float(np.max(np.abs(q2 - p.c * q + q * q)))


def closed_form_mass_energy(c: float) -> tuple[float, float]:
    """Full-line ``M = 3 c^{3/2}`` and ``E = -(9/5) c^{5/2}``."""
    if not c > 0:
        raise ValueError("c must be positive")
    return 3.0 * c ** 1.5, -1.8 * c ** 2.5


def tail_bound(c: float, a: float) -> float:
    """Comparison scale ``exp(-sqrt(c) a)``."""
    if a < 0:
        raise ValueError("a must be nonnegative")
    return float(np.exp(-np.sqrt(c) * a))


# --------------------------------------------------------------- tail integrals

def _eps(c: float, a: float) -> float:
    return float(2.0 * expit(-np.sqrt(c) * a))


def tail_integrals(c: float, a: float) -> dict[str, float]:
    """Integrals over ``(-inf, -a)`` of ``Q^2``, ``Q'^2`` and ``Q^3``.

    Here ``Q`` is centered at 0, so these are the pieces of a soliton
    centered at ``a`` that sit on the negative axis. Valid for any real ``a``.
    """
    A = 1.5 * c
    k = 0.5 * np.sqrt(c)
    e = _eps(c, a)
    s4 = e * e * (1.0 - e / 3.0) / k
    s4t2 = (e ** 2 - 5.0 * e ** 3 / 3.0 + e ** 4 - e ** 5 / 5.0) / k
    s6 = (4.0 * e ** 3 / 3.0 - e ** 4 + e ** 5 / 5.0) / k
    return {
        "q2": A * A * s4,
        "dq2": 4.0 * A * A * k * k * s4t2,
        "q3": A ** 3 * s6,
    }


def halfline_mass_energy(c: float, a: float) -> tuple[float, float]:
    """Mass and energy on ``[0, inf)`` of the soliton centered at ``a``."""
    M, E = closed_form_mass_energy(c)
    t = tail_integrals(c, a)
    return M - 0.5 * t["q2"], E - (0.5 * t["dq2"] - t["q3"] / 3.0)


def negative_side_h1(c: float, a: float) -> float:
    """Exact H1 norm over ``(-inf, 0)`` of the soliton centered at ``a``."""
    t = tail_integrals(c, a)
    return float(np.sqrt(t["q2"] + t["dq2"]))


def tail_h1_constant(c: float) -> float:
    """Constant ``K`` with ``negative_side_h1(c, a) ~ K exp(-sqrt(c) a)``."""
    return float(6.0 * c * np.sqrt((1.0 + c) / (2.0 * np.sqrt(c))))


def tail_mass_constant(c: float) -> float:
    """Leading constant of the mass cut off: ``~ 9 c^{3/2} exp(-2 sqrt(c) a)``."""
    return 9.0 * c ** 1.5


def tail_energy_constant(c: float) -> float:
    """Leading constant of the energy cut off: ``~ 9 c^{5/2} exp(-2 sqrt(c) a)``."""
    return 9.0 * c ** 2.5
