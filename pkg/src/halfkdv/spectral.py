"""The linearized operator ``L = -d^2/dx^2 + c - 2 Q_c`` on a truncated line.

``L`` is discretized with the 3-point Laplacian and homogeneous Dirichlet
conditions, so on the interior nodes it is a symmetric tridiagonal matrix.
Its continuum spectrum below the edge ``c`` is ``{-5c/4, 0, 3c/4}`` (a
reflectionless sech^2 well), with kernel spanned by ``Q_c'``.

Coercivity is the statement that ``<L v, v> >= kappa ||v||_H1^2`` for
``v`` orthogonal (in L2) to ``Q_c`` and ``Q_c'``. The discrete constant
``kappa`` is the smallest eigenvalue of the pencil ``(W A, G)`` restricted
to that subspace, where ``W`` holds the trapezoid weights and ``G`` is the
Gram matrix of the discrete H1 inner product used by :func:`grid.norm`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .grid import Field, Grid, Side, norm, trapezoid, trapezoid_weights
from .soliton import profile_values


class CoercivityError(RuntimeError):
    """The constrained minimum is not positive."""


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class OperatorMatrix:
    """Tridiagonal interior representation of ``L``.

    ``diag`` and ``off`` act on nodes ``1 .. n-2``; the end nodes carry the
    Dirichlet condition.
    """

    grid: Grid
    c: float
    center: float
    diag: np.ndarray
    off: np.ndarray

    @property
    def potential(self) -> np.ndarray:
        return self.c - 2.0 * profile_values(self.c, self.grid.x - self.center)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``A v`` on the full grid (zero at the ends)."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.grid.n_points:
            raise ValueError("vector does not match the operator grid")
        v = v.copy()
        v[0] = v[-1] = 0.0
        out = np.zeros_like(v)
        out[1:-1] = self.diag * v[1:-1] + self.off[0] * (v[:-2] + v[2:])
        return out

    def sparse_interior(self) -> sp.csr_matrix:
        m = self.diag.shape[0]
        return sp.diags([self.off[: m - 1], self.diag, self.off[: m - 1]], [-1, 0, 1], format="csr")


def build_operator(c: float, center: float, g: Grid) -> OperatorMatrix:
    """Assemble ``-D2 + c - 2 Q_c(. - center)`` with Dirichlet ends."""
    if g.side is not Side.FULL:
        raise ValueError("the linearized operator lives on a full-line grid")
    if not c > 0:
        raise ValueError("c must be positive")
    if abs(center) > 0.5 * g.extent:
        raise ValueError("soliton center too close to the truncation boundary")
    h = g.h
    x = g.x[1:-1]
    diag = 2.0 / (h * h) + c - 2.0 * profile_values(c, x - center)
    off = np.full(diag.shape[0], -1.0 / (h * h))
    return OperatorMatrix(g, float(c), float(center), diag, off)


def _check_grid(A: OperatorMatrix, v: Field) -> None:
    if v.grid != A.grid:
        raise ValueError("field and operator live on different grids")


def bilinear_form(A: OperatorMatrix, v: Field, w: Field) -> float:
    """Trapezoid pairing ``int w (A v)``."""
    _check_grid(A, v)
    _check_grid(A, w)
    return trapezoid(w.values * A.apply(v.values), A.grid.h)


def quadratic_form(A: OperatorMatrix, v: Field) -> float:
    """``int v (A v)``, the discrete ``int v_x^2 + c v^2 - 2 Q v^2``."""
    return bilinear_form(A, v, v)


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec if vec[k] >= 0 else -vec


def lowest_eigenpairs(A: OperatorMatrix, k: int) -> list:
    """The ``k`` smallest eigenvalues with L2-normalized eigenvectors."""
    if not 1 <= k <= 6:
        raise ValueError("k must lie in 1..6")
    try:
        w, v = sla.eigh_tridiagonal(A.diag, A.off[:-1], select="i", select_range=(0, k - 1))
    except sla.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    order = np.argsort(w, kind="stable")
    out = []
    h = A.grid.h
    for j in order:
        full = np.zeros(A.grid.n_points)
        full[1:-1] = _fix_sign(v[:, j])
        full /= np.sqrt(trapezoid(full ** 2, h))
        out.append((float(w[j]), Field(A.grid, full)))
    return out


def kernel_residual(A: OperatorMatrix) -> float:
    """``||A Q'|| / ||Q'||`` in L2 with the analytic ``Q'``."""
    dq = profile_values(A.c, A.grid.x - A.center, 1)
    r = A.apply(dq)
    h = A.grid.h
    return float(np.sqrt(trapezoid(r ** 2, h) / trapezoid(dq ** 2, h)))


# ------------------------------------------------------------------ coercivity

def h1_gram(g: Grid) -> sp.csc_matrix:
    """Gram matrix of :func:`grid.norm` (H1) restricted to interior nodes."""
    n, h = g.n_points, g.h
    rows, cols, vals = [], [], []
    for i in range(1, n - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [0, 0, 0, n - 1, n - 1, n - 1]
    cols += [0, 1, 2, n - 1, n - 2, n - 3]
    vals += [-1.5 / h, 2.0 / h, -0.5 / h, 1.5 / h, -2.0 / h, 0.5 / h]
    D = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W = sp.diags(trapezoid_weights(n, h))
    G = W + D.T @ W @ D
    return sp.csc_matrix(G[1:-1, 1:-1])


def _weighted_directions(c: float, g: Grid, center: float) -> np.ndarray:
    x = g.x[1:-1]
    w = g.h
    return np.column_stack([w * profile_values(c, x - center), w * profile_values(c, x - center, 1)])


def project_out(v: Field, c: float, center: float = 0.0) -> Field:
    """Remove the L2 components along ``Q_c`` and ``Q_c'``."""
    g = v.grid
    x, h = g.x, g.h
    basis = [profile_values(c, x - center), profile_values(c, x - center, 1)]
    gram = np.array([[trapezoid(a * b, h) for b in basis] for a in basis])
    rhs = np.array([trapezoid(a * v.values, h) for a in basis])
    coef = np.linalg.solve(gram, rhs)
    out = v.values - coef[0] * basis[0] - coef[1] * basis[1]
    out[0] = out[-1] = 0.0
    return Field(g, out)


def random_smooth_field(g: Grid, rng: np.random.Generator, n_bumps: int = 6) -> Field:
    """Sum of Gaussians with seeded centers, widths and weights, zero at the ends."""
    x = g.x
    span = 0.5 * g.extent
    v = np.zeros_like(x)
    for _ in range(n_bumps):
        v += rng.normal() * np.exp(-((x - rng.uniform(-span, span)) / rng.uniform(0.3, 4.0)) ** 2)
    v[0] = v[-1] = 0.0
    return Field(g, v)


def rayleigh_ratio(A: OperatorMatrix, v: Field) -> float:
    n2 = norm(v, "H1") ** 2
    return quadratic_form(A, v) / n2


@dataclass(frozen=True)
class CoercivityResult:
    kappa: float
    worst_case: Field
    trial_min: float
    unconstrained_min: float
    n_trials: int

    def __iter__(self):
        return iter((self.kappa, self.worst_case))


def _pencil(A: OperatorMatrix):
    g = A.grid
    Aw = sp.csc_matrix(g.h * A.sparse_interior())
    G = h1_gram(g)
    return Aw, G


def constrained_minimum(A: OperatorMatrix, seed: int = 0, constrained: bool = True,
                        tol: float = 0.0):
    """Smallest eigenpair of ``(W A, G)``, optionally on the orthogonal subspace.

    Shift-invert Lanczos with a shift below the whole spectrum. The
    constraint enters through the bordered system

        [[W A - s G, C], [C^T, 0]] [x, mu] = [b, 0],   C = W [Q, Q'],

    whose solution operator is symmetric in the G inner product and
    annihilates the constrained directions.
    """
    g = A.grid
    Aw, G = _pencil(A)
    m = Aw.shape[0]
    shift = -(1.5 * A.c + 0.1)
    if constrained:
        C = sp.csc_matrix(_weighted_directions(A.c, g, A.center))
        K = sp.bmat([[Aw - shift * G, C], [C.T, None]], format="csc")
        pad = np.zeros(C.shape[1])
    else:
        K = sp.csc_matrix(Aw - shift * G)
        pad = np.zeros(0)
    lu = splu(K)

    def solve(b):
        return lu.solve(np.concatenate([np.ravel(b), pad]))[:m]

    op = LinearOperator((m, m), matvec=solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(m)
    try:
        w, v = eigsh(Aw, k=1, M=G, sigma=shift, which="LM", OPinv=op, v0=v0, tol=tol)
    except ArpackNoConvergence as exc:
        raise EigenSolverError(str(exc)) from exc
    full = np.zeros(g.n_points)
    full[1:-1] = _fix_sign(v[:, 0])
    full /= norm(Field(g, full), "H1")
    return float(w[0]), Field(g, full)


def dense_constrained_minimum(A: OperatorMatrix, constrained: bool = True) -> float:
    """Reference value of :func:`constrained_minimum` by a dense eigensolve."""
    Aw, G = _pencil(A)
    Ad, Gd = Aw.toarray(), G.toarray()
    if constrained:
        N = sla.null_space(_weighted_directions(A.c, A.grid, A.center).T)
        Ad, Gd = N.T @ Ad @ N, N.T @ Gd @ N
    return float(sla.eigh(Ad, Gd, eigvals_only=True, subset_by_index=(0, 0))[0])


def coercivity_check(c: float, g: Grid, trials: int = 20, seed: int = 0,
                     center: float = 0.0) -> CoercivityResult:
    """Minimum of ``<L v, v> / ||v||_H1^2`` over ``v`` orthogonal to ``Q``, ``Q'``.

    Seeded random trials give an upper bound; the constrained Rayleigh
    minimization gives the discrete minimum itself. Raises
    :class:`CoercivityError` unless the minimum is positive.
    """
    if trials < 10:
        raise ValueError("at least 10 trials are required")
    A = build_operator(c, center, g)
    rng = np.random.default_rng(seed)
    best = np.inf
    best_field = None
    for _ in range(trials):
        raw = random_smooth_field(g, rng)
        v = project_out(raw, c, center)
        if norm(v, "H1") <= 1e-8 * max(norm(raw, "H1"), 1e-300):
            continue
        r = rayleigh_ratio(A, v)
        if r < best:
            best, best_field = r, v
    kappa, worst = constrained_minimum(A, seed=seed)
    unc, _ = constrained_minimum(A, seed=seed, constrained=False)
    if best_field is not None and best < kappa:
        kappa, worst = best, best_field
    if not kappa > 0:
        raise CoercivityError(f"constrained minimum {kappa:.3e} is not positive")
    return CoercivityResult(kappa, worst, float(best), unc, trials)
