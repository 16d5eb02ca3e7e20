"""Implicit Runge-Kutta stage solving and one-step predictions.

The stage states chi_i of an s-stage method satisfy the nonlinear system

    chi_i = x + h * sum_j A[i,j] f(chi_j),      i = 1..s,

solved here either by fixed-point substitution or by Newton's method on
the full (s*d) x (s*d) system with analytic Jacobians assembled from the
feature library.  The step map

    step(f, x, h) = x + h * sum_j b_j f(chi_j)

runs forward for h > 0 and backward for h < 0; Gauss methods are
symmetric, so the backward step inverts the forward one.

Everything is vectorized over sample intervals: `predict_matrices` solves
all m stage systems of a trajectory in one batched call.
"""

from dataclasses import dataclass, field

import numpy as np

from . import grad
from .coefficients import CoefficientMatrix
from .errors import DimensionMismatch, NonConvergence, SingularJacobian
from .features import Library
from .tableau import ButcherTableau

_DIVERGENCE_PATIENCE = 5  # consecutive defect growths before giving up


@dataclass
class SolverSettings:
    """How to solve the stage equations.

    max_iterations defaults to 100 for fixed-point and 25 for Newton.
    """

    method: str = "newton"
    tol: float = 1e-12
    max_iterations: int = field(default=None)

    def __post_init__(self):
        if self.method not in ("fixed_point", "newton"):
            raise ValueError(f"unknown stage solver method {self.method!r}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iterations is None:
            self.max_iterations = 100 if self.method == "fixed_point" else 25
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class StageValues:
    """Solved stage states plus solver diagnostics."""

    chi: np.ndarray          # (s, d)
    iterations_used: int
    residual: float


def _split_field(f):
    """Accept (Library, CoefficientMatrix) or (Library, ndarray)."""
    lib, xi = f
    if not isinstance(lib, Library):
        raise DimensionMismatch("right-hand side must pair a Library with coefficients")
    xi_arr = xi.xi if isinstance(xi, CoefficientMatrix) else np.asarray(xi, dtype=float)
    if xi_arr.shape[0] != lib.p:
        raise DimensionMismatch(
            f"coefficients have {xi_arr.shape[0]} rows, library has {lib.p} terms")
    return lib, xi_arr


def _worst_row(defect_rows):
    return int(np.argmax(defect_rows))


def _newton_batch(lib, xi, X, h, A, tol, max_iterations):
    """Solve all stage systems for base states X (m, d) and steps h (m,)."""
    m, d = X.shape
    s = A.shape[0]
    chi = np.repeat(X[:, None, :], s, axis=1)
    eye = np.eye(s * d)
    iterations = 0
    while True:
        F = lib.evaluate_many(chi) @ xi                     # (m, s, d)
        defect = chi - X[:, None, :] - h[:, None, None] * np.einsum(
            "ij,mjd->mid", A, F)
        rows = np.max(np.abs(defect), axis=(1, 2))
        res = float(np.max(rows)) if m else 0.0
        if not np.isfinite(res):
            bad = int(np.argmax(~np.isfinite(rows)))
            raise NonConvergence("stage iteration produced non-finite values",
                                 row=bad, residual=res)
        if res <= tol:
            return chi, iterations, res
        if iterations >= max_iterations:
            raise NonConvergence(
                f"Newton exhausted {max_iterations} iterations"
                f" (defect {res:.3e} > tol {tol:.3e})",
                row=_worst_row(rows), residual=res)
        Jphi = lib.jacobian_many(chi.reshape(m * s, d))     # (ms, p, din)
        Jf = np.einsum("ab,nae->nbe", xi, Jphi).reshape(m, s, d, d)
        blocks = np.einsum("m,ij,mjbe->mibje", h, A, Jf).reshape(m, s * d, s * d)
        try:
            delta = np.linalg.solve(eye[None, :, :] - blocks,
                                    defect.reshape(m, s * d, 1))
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"stage Jacobian is singular: {exc}") from exc
        chi = chi - delta.reshape(m, s, d)
        iterations += 1


def _fixed_point_batch(lib, xi, X, h, A, tol, max_iterations):
    m, d = X.shape
    s = A.shape[0]
    chi = np.repeat(X[:, None, :], s, axis=1)
    prev = np.inf
    growth = 0
    iterations = 0
    while True:
        F = lib.evaluate_many(chi) @ xi
        target = X[:, None, :] + h[:, None, None] * np.einsum("ij,mjd->mid", A, F)
        defect = chi - target
        rows = np.max(np.abs(defect), axis=(1, 2))
        res = float(np.max(rows)) if m else 0.0
        if not np.isfinite(res):
            bad = int(np.argmax(~np.isfinite(rows)))
            raise NonConvergence("stage iteration produced non-finite values",
                                 row=bad, residual=res)
        if res <= tol:
            return chi, iterations, res
        growth = growth + 1 if res > prev else 0
        if growth >= _DIVERGENCE_PATIENCE:
            raise NonConvergence(
                f"fixed-point iteration diverging (defect {res:.3e})",
                row=_worst_row(rows), residual=res)
        if iterations >= max_iterations:
            raise NonConvergence(
                f"fixed-point exhausted {max_iterations} iterations"
                f" (defect {res:.3e} > tol {tol:.3e})",
                row=_worst_row(rows), residual=res)
        chi = target
        prev = res
        iterations += 1


def _solve_batch(lib, xi, X, h, tab, settings):
    solver = _newton_batch if settings.method == "newton" else _fixed_point_batch
    return solver(lib, xi, X, h, tab.A, settings.tol, settings.max_iterations)


def _stage_jacobian_matrices(lib, xi, chi, h, A):
    """(m, s*d, s*d) stage-system Jacobians at the given stage states."""
    m, s, d = chi.shape
    Jphi = lib.jacobian_many(chi.reshape(m * s, d))
    Jf = np.einsum("ab,nae->nbe", xi, Jphi).reshape(m, s, d, d)
    blocks = np.einsum("m,ij,mjbe->mibje", h, A, Jf).reshape(m, s * d, s * d)
    return np.eye(s * d)[None, :, :] - blocks


def _stage_solution_var(xi_var, lib, X, h, tab, settings):
    """Stage states as a recorded node; backward runs the adjoint solve.

    The stages are an implicit function of the coefficients through the
    stage equations g(chi, xi) = 0, so the reverse rule solves

        M^T u = chi_bar,    dxi += h * phi(chi_j)^T (A^T u)_j

    with M the same stage Jacobian Newton uses.
    """
    xi = xi_var.value
    chi, _, _ = _solve_batch(lib, xi, X, h, tab, settings)
    m, s, d = chi.shape
    phi = lib.evaluate_many(chi)                            # (m, s, p)
    M = _stage_jacobian_matrices(lib, xi, chi, h, tab.A)

    def backward(chibar):
        u = np.linalg.solve(np.swapaxes(M, 1, 2), chibar.reshape(m, s * d, 1))
        u = u.reshape(m, s, d)
        w = np.einsum("ij,mid->mjd", tab.A, u)
        return (np.einsum("m,mja,mjb->ab", h, phi, w),)

    return grad.custom(xi_var.tape, chi, (xi_var,), backward)


def _unrolled_stages_var(xi_var, lib, X, h, tab, settings):
    """Stage states as the recorded fixed-point substitution sequence.

    The iteration count is fixed by a plain solve first, then exactly that
    many substitutions are re-recorded so the gradient differentiates the
    converged computation itself.
    """
    _, iterations, _ = _solve_batch(lib, xi_var.value, X, h, tab, settings)
    chi = np.repeat(X[:, None, :], tab.s, axis=1)
    base = X[:, None, :]
    hh = h[:, None, None]
    for _ in range(iterations):
        f = grad.matmul(lib.features_of(chi), xi_var)
        chi = base + hh * grad.matmul(tab.A, f)
    return chi


def _stages_for(xi_obj, lib, X, h, tab, settings):
    if isinstance(xi_obj, grad.Var):
        if settings.method == "newton":
            return _stage_solution_var(xi_obj, lib, X, h, tab, settings)
        return _unrolled_stages_var(xi_obj, lib, X, h, tab, settings)
    chi, _, _ = _solve_batch(lib, xi_obj, X, h, tab, settings)
    return chi


def _step_batch(xi_obj, lib, X, h, tab, settings):
    """One IRK step from every base state; polymorphic over Var/ndarray."""
    chi = _stages_for(xi_obj, lib, X, h, tab, settings)
    f = grad.matmul(lib.features_of(chi), xi_obj)           # (m, s, d)
    bf = grad.matmul(tab.b[None, :], f)                     # (m, 1, d)
    m, d = X.shape
    return X + h[:, None] * grad.reshape(bf, (m, d))


def rk4_step_batch(xi_obj, lib, X, h):
    """Classical explicit fourth-order step; the baseline stepping rule."""
    def f(z):
        return grad.matmul(lib.features_of(z), xi_obj)

    half = (h / 2.0)[:, None]
    k1 = f(X)
    k2 = f(X + half * k1)
    k3 = f(X + half * k2)
    k4 = f(X + h[:, None] * k3)
    return X + (h / 6.0)[:, None] * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# -- public single-interval operations -------------------------------------

def solve_stages(f, x, h, tab: ButcherTableau,
                 settings: SolverSettings | None = None) -> StageValues:
    """Solve the stage equations for one base state.

    Parameters
    ----------
    f : (Library, CoefficientMatrix or ndarray)
        Right-hand side of the differential equation.
    x : ndarray, shape (d,)
        Base state.
    h : float
        Signed stepsize; negative values set up the backward step.
    """
    lib, xi = _split_field(f)
    settings = settings or SolverSettings()
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != lib.dimension:
        raise DimensionMismatch(
            f"state shape {x.shape} does not match library dimension {lib.dimension}")
    if not np.isfinite(h):
        raise DimensionMismatch(f"stepsize must be finite, got {h}")
    chi, iterations, residual = _solve_batch(
        lib, xi, x[None, :], np.array([float(h)]), tab, settings)
    return StageValues(chi=chi[0], iterations_used=iterations, residual=residual)


def step(f, x, h, tab: ButcherTableau,
         settings: SolverSettings | None = None) -> np.ndarray:
    """Advance one step of signed size h from state x."""
    lib, xi = _split_field(f)
    settings = settings or SolverSettings()
    x = np.asarray(x, dtype=float)
    return _step_batch(xi, lib, x[None, :], np.array([float(h)]), tab, settings)[0]


def stage_predictors(chi, f, x, h, tab: ButcherTableau):
    """Per-stage reconstructions of the interval endpoints.

    Row i of the first matrix is chi_i - h sum_j A[i,j] f(chi_j), which
    recovers the left endpoint x; row i of the second is
    chi_i + h sum_j (b_j - A[i,j]) f(chi_j), which recovers the step
    result.  When chi solves the stage equations exactly, all s rows of
    each matrix coincide with those targets to solver tolerance.
    """
    lib, xi = _split_field(f)
    chi_arr = chi.chi if isinstance(chi, StageValues) else np.asarray(chi, dtype=float)
    if chi_arr.shape != (tab.s, lib.dimension):
        raise DimensionMismatch(
            f"stage array has shape {chi_arr.shape},"
            f" expected {(tab.s, lib.dimension)}")
    F = lib.evaluate_many(chi_arr) @ xi                     # (s, d)
    left = chi_arr - h * (tab.A @ F)
    right = chi_arr + h * ((tab.b[None, :] - tab.A) @ F)
    return left, right


def predict_matrices(f, ds, tab: ButcherTableau,
                     settings: SolverSettings | None = None,
                     alignment: str = "paired"):
    """Backward and forward one-step predictions for every interval.

    Returns (XL_pred, XR_pred), each of shape (m, d).  Row k of XR_pred
    steps forward from sample k over +h_k and targets sample k+1.  With
    the default "paired" alignment, row k of XL_pred steps backward from
    sample k+1 over -h_k so that it targets sample k; the "literal"
    alignment instead steps backward from sample k itself.

    Raises
    ------
    NonConvergence, SingularJacobian
        Annotated with the offending interval index.
    """
    lib, xi = _split_field(f)
    settings = settings or SolverSettings()
    if alignment not in ("paired", "literal"):
        raise ValueError(f"unknown alignment {alignment!r}")
    X = np.asarray(ds.X, dtype=float)
    h = np.asarray(ds.h, dtype=float)
    if h.size < 1:
        raise DimensionMismatch("dataset needs at least one interval")
    try:
        xr_pred = _step_batch(xi, lib, X[:-1], h, tab, settings)
        base = X[1:] if alignment == "paired" else X[:-1]
        xl_pred = _step_batch(xi, lib, base, -h, tab, settings)
    except NonConvergence as exc:
        raise NonConvergence(f"stage solve failed at interval {exc.row}: {exc}",
                             row=exc.row, residual=exc.residual) from exc
    return xl_pred, xr_pred
