"""Synthetic benchmark trajectories and the data pipeline around them.

Data generation forward-solves the benchmark systems with the package's
own Gauss 5-stage Newton integrator under internal substepping (local
steps capped at MAX_LOCAL_STEP, halved whenever the stage solver fails),
so no external solver enters the loop.  Noise injection, Savitzky-Golay
smoothing, standardization and CSV round-tripping follow.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter as _scipy_savgol

from . import irk
from ._rng import SplitMix64
from .coefficients import CoefficientMatrix
from .errors import (DegenerateCoordinate, IntegrationFailure, InvalidParameter,
                     IoError, MalformedFile, NonConvergence, NonPolynomialLibrary,
                     NonUniformGrid, SingularJacobian, UnknownModel,
                     UnsupportedScalingMode, WindowTooLarge)
from .features import Library, LibrarySpec, build_library
from .tableau import gauss_tableau

MAX_LOCAL_STEP = 1e-2     # internal substep cap for trajectory generation
_SUBSTEP_FLOOR = 1e-8     # below this substep size, integration has failed


@dataclass
class Dataset:
    """Sampled trajectory: times t (m+1,), states X (m+1, d), steps h (m,)."""

    t: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.t.ndim != 1 or self.X.ndim != 2 or self.t.size != self.X.shape[0]:
            raise ValueError("t must be (m+1,), X must be (m+1, d)")
        if self.t.size >= 2 and not np.all(np.diff(self.t) > 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.t)):
            raise ValueError("dataset entries must be finite")

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.t)

    @property
    def m(self) -> int:
        return self.t.size - 1

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def copy(self) -> "Dataset":
        return Dataset(self.t.copy(), self.X.copy())


@dataclass(frozen=True)
class ScalingInfo:
    """Per-coordinate location/scale of a standardization transform."""

    mu: np.ndarray
    sigma: np.ndarray
    mode: str


@dataclass(frozen=True)
class ReferenceModel:
    """A benchmark right-hand side expressed over a polynomial library."""

    name: str
    dimension: int
    library: Library
    coefficients: CoefficientMatrix

    @property
    def field(self):
        return (self.library, self.coefficients)

    def rhs(self, x) -> np.ndarray:
        return self.library.evaluate_many(np.atleast_2d(x))[0] @ self.coefficients.xi


_MODEL_PARAMS = {
    "linear_osc": (),
    "cubic_osc": (),
    "fhn": (),
    "lorenz": ("sigma", "rho", "beta"),
    "lotka_volterra": ("alpha", "beta", "gamma", "delta"),
    "logistic": ("r", "K"),
}


def reference_model(name: str, overrides: dict | None = None) -> ReferenceModel:
    """Published benchmark systems over their minimal polynomial libraries.

    Parameters with published defaults (Lorenz sigma/rho/beta,
    Lotka-Volterra alpha/beta/gamma/delta, logistic r/K) can be overridden;
    anything else raises InvalidParameter.
    """
    if name == "custom":
        raise InvalidParameter(
            "construct a ReferenceModel directly for custom dynamics")
    if name not in _MODEL_PARAMS:
        raise UnknownModel(f"unknown model {name!r};"
                           f" choose from {sorted(_MODEL_PARAMS)}")
    params = dict(overrides or {})
    for key in params:
        if key not in _MODEL_PARAMS[name]:
            raise InvalidParameter(
                f"model {name!r} has no parameter {key!r}"
                f" (declared: {list(_MODEL_PARAMS[name])})")

    def _lib(d, deg, const):
        return build_library(LibrarySpec(dimension=d, polynomial_max_degree=deg,
                                         include_constant=const))

    if name == "linear_osc":
        lib = _lib(2, 1, False)
        xi = np.zeros((lib.p, 2))
        xi[lib.names.index("x1")] = [-0.1, -2.0]
        xi[lib.names.index("x2")] = [2.0, -0.1]
    elif name == "cubic_osc":
        lib = _lib(2, 3, False)
        xi = np.zeros((lib.p, 2))
        xi[lib.names.index("x1^3")] = [-0.1, -2.0]
        xi[lib.names.index("x2^3")] = [2.0, -0.1]
    elif name == "fhn":
        lib = _lib(2, 3, True)
        xi = np.zeros((lib.p, 2))
        xi[lib.names.index("1")] = [0.5, 0.032]
        xi[lib.names.index("x1")] = [1.0, 0.04]
        xi[lib.names.index("x2")] = [-1.0, -0.028]
        xi[lib.names.index("x1^3")] = [-1.0 / 3.0, 0.0]
    elif name == "lorenz":
        sigma = float(params.get("sigma", 10.0))
        rho = float(params.get("rho", 28.0))
        beta = float(params.get("beta", 8.0 / 3.0))
        lib = _lib(3, 2, False)
        xi = np.zeros((lib.p, 3))
        xi[lib.names.index("x1")] = [-sigma, rho, 0.0]
        xi[lib.names.index("x2")] = [sigma, -1.0, 0.0]
        xi[lib.names.index("x3")] = [0.0, 0.0, -beta]
        xi[lib.names.index("x1*x3")] = [0.0, -1.0, 0.0]
        xi[lib.names.index("x1*x2")] = [0.0, 0.0, 1.0]
    elif name == "lotka_volterra":
        alpha = float(params.get("alpha", 2.0 / 3.0))
        beta = float(params.get("beta", 4.0 / 3.0))
        gamma = float(params.get("gamma", 1.0))
        delta = float(params.get("delta", 1.0))
        lib = _lib(2, 2, False)
        xi = np.zeros((lib.p, 2))
        xi[lib.names.index("x1")] = [alpha, 0.0]
        xi[lib.names.index("x2")] = [0.0, -gamma]
        xi[lib.names.index("x1*x2")] = [-beta, delta]
    else:  # logistic
        r = float(params.get("r", 0.31))
        K = float(params.get("K", 2.0))
        if K == 0:
            raise InvalidParameter("carrying capacity K must be nonzero")
        lib = _lib(1, 2, False)
        xi = np.zeros((lib.p, 1))
        xi[lib.names.index("x1")] = [r]
        xi[lib.names.index("x1^2")] = [-r / K]

    model = ReferenceModel(name=name, dimension=lib.dimension, library=lib,
                           coefficients=CoefficientMatrix(xi))
    if not np.all(np.isfinite(model.rhs(np.ones(lib.dimension)))):
        raise InvalidParameter(f"model {name!r} is not finite at a unit state")
    return model


# -- trajectory generation -------------------------------------------------

def _advance_interval(lib, xi, x, t_start, h_total, tab, settings,
                      max_local_step):
    """Integrate across one sample interval with substep halving on failure."""
    n_sub = max(1, math.ceil(abs(h_total) / max_local_step))
    while True:
        if abs(h_total) / n_sub < _SUBSTEP_FLOOR:
            raise IntegrationFailure(
                f"stage solver kept failing near t = {t_start:.6g}"
                f" even at substep floor", blowup_time=t_start)
        try:
            y = x
            hs = np.array([h_total / n_sub])
            for _ in range(n_sub):
                y = irk._step_batch(xi, lib, y[None, :], hs, tab, settings)[0]
                if not np.all(np.isfinite(y)):
                    raise NonConvergence("state became non-finite")
            return y
        except (NonConvergence, SingularJacobian):
            n_sub *= 2


def integrate_grid(f, x0, t_grid, stages: int = 5,
                   max_local_step: float = MAX_LOCAL_STEP,
                   tol: float = 1e-12) -> np.ndarray:
    """Integrate a (Library, coefficients) field over explicit sample times.

    Raises IntegrationFailure, carrying the approximate blow-up time, when
    Newton keeps failing at the substep floor or the state leaves the
    representable range.
    """
    lib, xi = irk._split_field(f)
    tab = gauss_tableau(stages)
    settings = irk.SolverSettings(method="newton", tol=tol)
    t_grid = np.asarray(t_grid, dtype=float)
    X = np.empty((t_grid.size, lib.dimension))
    X[0] = np.asarray(x0, dtype=float)
    for k in range(t_grid.size - 1):
        X[k + 1] = _advance_interval(lib, xi, X[k], t_grid[k],
                                     t_grid[k + 1] - t_grid[k], tab, settings,
                                     max_local_step)
    return X


def generate(model: ReferenceModel, x0, t0: float, t_end: float,
             m: int) -> Dataset:
    """Sample the model on a uniform grid of m+1 points over [t0, t_end].

    The initial state is stored exactly; later samples come from the
    Gauss 5-stage Newton integrator with substepping, accurate to well
    below 1e-10 relative error per sample for the benchmark systems.
    """
    if t_end <= t0:
        raise InvalidParameter(f"need t_end > t0, got [{t0}, {t_end}]")
    if m < 1:
        raise InvalidParameter(f"need at least one interval, got m={m}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dimension,):
        raise InvalidParameter(
            f"x0 has shape {x0.shape}, model dimension is {model.dimension}")
    t = np.linspace(float(t0), float(t_end), int(m) + 1)
    X = integrate_grid(model.field, x0, t)
    return Dataset(t=t, X=X)


# -- noise, smoothing, scaling ---------------------------------------------

def add_noise(ds: Dataset, sigma: float, seed: int) -> Dataset:
    """Add iid zero-mean Gaussian perturbations of std `sigma` to every
    state entry (the initial sample included).  Same seed, same output."""
    if sigma < 0:
        raise InvalidParameter(f"noise level must be nonnegative, got {sigma}")
    if sigma == 0:
        return ds.copy()
    rng = SplitMix64(seed)
    noise = rng.normal_array(ds.X.shape)
    return Dataset(ds.t.copy(), ds.X + sigma * noise)


def savgol_filter(ds: Dataset, window: int, poly_order: int) -> Dataset:
    """Savitzky-Golay smoothing on a uniform grid.

    Interior samples are replaced by the window-centered local
    least-squares polynomial value; at the boundaries the first/last full
    window is fit once and evaluated at the edge offsets (no padding).
    """
    m1 = ds.t.size
    if window % 2 == 0 or window < 3:
        raise WindowTooLarge(f"window must be an odd integer >= 3, got {window}")
    if window > m1:
        raise WindowTooLarge(f"window {window} exceeds record length {m1}")
    if not 0 <= poly_order < window:
        raise WindowTooLarge(
            f"polynomial order {poly_order} must lie in [0, window)")
    h = ds.h
    if h.size and not np.allclose(h, h[0], rtol=1e-8, atol=0.0):
        raise NonUniformGrid("smoothing requires uniformly spaced samples")
    smoothed = _scipy_savgol(ds.X, window, poly_order, axis=0, mode="interp")
    return Dataset(ds.t.copy(), smoothed)


def standardize(ds: Dataset, mode: str):
    """Rescale coordinates to unit standard deviation.

    mode="scale_only" divides by the per-coordinate std (monomial support
    is provably preserved); mode="full_standardize" also removes the mean,
    at the cost of coefficients staying in scaled coordinates.
    Returns (scaled dataset, ScalingInfo).
    """
    if mode not in ("scale_only", "full_standardize"):
        raise ValueError(f"unknown standardization mode {mode!r}")
    if ds.m < 1:
        raise ValueError("standardization needs at least two samples")
    sigma = ds.X.std(axis=0)
    if np.any(sigma == 0):
        bad = int(np.argmax(sigma == 0))
        raise DegenerateCoordinate(
            f"coordinate {bad + 1} has zero variance and cannot be scaled")
    if mode == "full_standardize":
        mu = ds.X.mean(axis=0)
    else:
        mu = np.zeros(ds.d)
    scaled = Dataset(ds.t.copy(), (ds.X - mu) / sigma)
    return scaled, ScalingInfo(mu=mu, sigma=sigma, mode=mode)


def rescale_coefficients(xi: CoefficientMatrix, scaling: ScalingInfo,
                         lib: Library) -> CoefficientMatrix:
    """Map coefficients found in scaled coordinates y = x / sigma back to
    the original coordinates.

    A monomial term with powers p feeding equation i picks up the factor
    sigma_i / prod_j sigma_j^{p_j} (chain rule), so the transform is exact
    and support-preserving for purely polynomial libraries.
    """
    if scaling.mode != "scale_only":
        raise UnsupportedScalingMode(
            "only scale_only coefficients can be mapped back; full"
            " standardization shifts the polynomial support")
    if not lib.is_polynomial:
        raise NonPolynomialLibrary(
            "coefficient rescaling requires a purely polynomial library")
    if xi.p != lib.p:
        raise ValueError(f"coefficients have {xi.p} rows, library has {lib.p}")
    sigma = np.asarray(scaling.sigma, dtype=float)
    denom = np.prod(sigma[None, :] ** lib._exponents, axis=1)   # (p,)
    factors = sigma[None, :] / denom[:, None]                   # (p, d)
    return CoefficientMatrix(xi.xi * factors, xi.active_mask.copy())


# -- trajectory files -------------------------------------------------------

def save_csv(ds: Dataset, path) -> None:
    """Write `t,x1,...,xd` rows with 17 significant digits (exact round trip)."""
    header = "t," + ",".join(f"x{i + 1}" for i in range(ds.d))
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(header + "\n")
            for k in range(ds.t.size):
                row = [f"{ds.t[k]:.17g}"] + [f"{v:.17g}" for v in ds.X[k]]
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_csv(path) -> Dataset:
    """Read a trajectory written by `save_csv`."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise MalformedFile(f"{path}: empty file")
    header = lines[0].split(",")
    if header[0] != "t" or len(header) < 2:
        raise MalformedFile(f"{path}: header must be t,x1,...,xd")
    ncol = len(header)
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != ncol:
            raise MalformedFile(
                f"{path}: row has {len(parts)} columns, header has {ncol}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise MalformedFile(f"{path}: non-numeric entry ({exc})") from exc
    if not rows:
        raise MalformedFile(f"{path}: no data rows")
    data = np.array(rows)
    t, X = data[:, 0], data[:, 1:]
    if t.size >= 2 and not np.all(np.diff(t) > 0):
        raise MalformedFile(f"{path}: sample times are not strictly increasing")
    try:
        return Dataset(t=t, X=X)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
