"""Pure numpy/scipy implementation of the time-step kernel.

Same contract as the compiled ``_kernels`` module; used when the extension
is unavailable or when ``HALFKDV_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg.lapack import dgbtrs


def apply_f(u: np.ndarray, h: float, ghost: float) -> np.ndarray:
    """Return ``D3 u + D1(u^2)`` with zero boundary rows."""
    n = u.shape[0]
    out = np.zeros(n)
    h3 = 2.0 * h ** 3
    w = u * u
    out[1] = (-3.0 * u[0] + 10.0 * u[1] - 12.0 * u[2] + 6.0 * u[3] - u[4]) / h3
    out[2:-2] = (-u[:-4] + 2.0 * u[1:-3] - 2.0 * u[3:-1] + u[4:]) / h3
    out[n - 2] = (-u[n - 4] + 2.0 * u[n - 3] + u[n - 2] - 2.0 * u[n - 1]) / h3 + ghost
    out[1:-1] += (w[2:] - w[:-2]) / (2.0 * h)
    return out


def band_solve(ab, piv, kl: int, ku: int, b: np.ndarray) -> None:
    """Solve in place with a ``dgbtrf`` factor."""
    x, info = dgbtrs(ab, kl, ku, b, piv)
    if info != 0:
        raise RuntimeError(f"dgbtrs failed with info={info}")
    b[:] = x


def picard_step(ab, piv, kl, ku, u, h, dt, theta, left_val, right_val,
                ghost_old, ghost_new, tol, max_iter):
    """Advance one step. Returns ``(v, iterations, last_update)``."""
    a = theta * dt
    base = u - (1.0 - theta) * dt * apply_f(u, h, ghost_old)
    v = np.array(u, copy=True)
    upd = 0.0
    it = 0
    while it < max_iter:
        w = v * v
        r = base.copy()
        r[1:-1] -= a * (w[2:] - w[:-2]) / (2.0 * h)
        r[-2] -= a * ghost_new
        r[0] = left_val
        r[-1] = right_val
        x, info = dgbtrs(ab, kl, ku, r, piv)
        if info != 0:
            raise RuntimeError(f"dgbtrs failed with info={info}")
        x[0] = left_val
        x[-1] = right_val
        upd = float(np.max(np.abs(x - v)))
        v = x
        it += 1
        if upd <= tol:
            break
    return v, it, upd


def prepare_factor(lu, piv, kl, ku):
    """Layout of the ``dgbtrf`` output expected by :func:`picard_step`."""
    return np.asfortranarray(lu), np.asarray(piv, dtype=np.int32)
