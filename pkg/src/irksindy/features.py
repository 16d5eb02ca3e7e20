"""Candidate-function libraries: construction, evaluation, differentiation.

A library is an ordered list of scalar terms phi_j(x).  The canonical
order is: constant first, then monomials in graded lexicographic order
(the full degree-1 block, then degree 2, ...; within a degree x1 powers
come first, e.g. x1^2, x1*x2, x2^2), then sine, cosine and exponential
blocks, each sorted by (frequency or rate, coordinate index).  Term names
are part of the public contract -- they label coefficient files -- and use
the lowercase "x1".."xd" convention with "^" powers and "*" products.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from . import grad
from .errors import DimensionMismatch, EmptyLibrary, InvalidParameter

MAX_POLY_DEGREE = 10


@dataclass(frozen=True)
class LibrarySpec:
    """Choices that define a library: state dimension, polynomial degree,
    constant term, sine/cosine frequencies, exponential rates."""

    dimension: int
    polynomial_max_degree: int = 0
    include_constant: bool = True
    trig_frequencies: tuple = ()
    exp_rates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "trig_frequencies",
                           tuple(float(f) for f in self.trig_frequencies))
        object.__setattr__(self, "exp_rates",
                           tuple(float(r) for r in self.exp_rates))

    def validate(self):
        if self.dimension < 1:
            raise InvalidParameter(f"dimension must be >= 1, got {self.dimension}")
        if self.polynomial_max_degree < 0 or self.polynomial_max_degree > MAX_POLY_DEGREE:
            raise InvalidParameter(
                f"polynomial degree must lie in [0, {MAX_POLY_DEGREE}],"
                f" got {self.polynomial_max_degree}")
        if any(f <= 0 for f in self.trig_frequencies):
            raise InvalidParameter("trig frequencies must be positive")


@dataclass(frozen=True)
class _Term:
    kind: str                      # "poly" | "sin" | "cos" | "exp"
    name: str
    exponents: tuple = ()          # poly only, length d
    coord: int = -1                # trig/exp only
    scale: float = 0.0             # frequency or rate

    @property
    def degree(self) -> int:
        return sum(self.exponents) if self.kind == "poly" else 0


def _coef_str(v: float) -> str:
    if v == int(v):
        v = int(v)
    return f"{v:g}"


def _monomial_name(exponents) -> str:
    parts = []
    for i, e in enumerate(exponents):
        if e == 0:
            continue
        parts.append(f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}")
    return "*".join(parts) if parts else "1"


def _scaled_arg(scale: float, coord: int) -> str:
    var = f"x{coord + 1}"
    if scale == 1.0:
        return var
    if scale == -1.0:
        return f"-{var}"
    return f"{_coef_str(scale)}*{var}"


@dataclass(frozen=True)
class Library:
    """Immutable ordered term list with fast vectorized evaluation."""

    spec: LibrarySpec
    terms: tuple
    p: int
    names: tuple
    # poly terms are the leading block; cached exponent matrix drives evaluation
    _exponents: np.ndarray = field(repr=False)
    _n_poly: int = field(repr=False)

    @property
    def is_polynomial(self) -> bool:
        return self._n_poly == self.p

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    # -- evaluation ------------------------------------------------------

    def _check_states(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.spec.dimension:
            raise DimensionMismatch(
                f"state has trailing dimension {x.shape[-1] if x.ndim else 0},"
                f" library expects {self.spec.dimension}")
        if not np.all(np.isfinite(x)):
            raise DimensionMismatch("state contains non-finite entries")
        return x

    def evaluate_many(self, x: np.ndarray) -> np.ndarray:
        """Feature rows for states with arbitrary leading shape (..., d)."""
        x = self._check_states(x)
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.spec.dimension)
        out = np.empty((flat.shape[0], self.p))
        if self._n_poly:
            out[:, :self._n_poly] = np.prod(
                flat[:, None, :] ** self._exponents[None, :, :], axis=2)
        for j in range(self._n_poly, self.p):
            t = self.terms[j]
            z = t.scale * flat[:, t.coord]
            if t.kind == "sin":
                out[:, j] = np.sin(z)
            elif t.kind == "cos":
                out[:, j] = np.cos(z)
            else:
                out[:, j] = np.exp(z)
        return out.reshape(*lead, self.p)

    def jacobian_many(self, x: np.ndarray) -> np.ndarray:
        """Analytic term Jacobians, shape (..., p, d)."""
        x = self._check_states(x)
        lead = x.shape[:-1]
        d = self.spec.dimension
        flat = x.reshape(-1, d)
        J = np.zeros((flat.shape[0], self.p, d))
        for j in range(self._n_poly):
            exps = self._exponents[j]
            for i in range(d):
                if exps[i] == 0:
                    continue
                reduced = exps.copy()
                reduced[i] -= 1
                J[:, j, i] = exps[i] * np.prod(flat ** reduced[None, :], axis=1)
        for j in range(self._n_poly, self.p):
            t = self.terms[j]
            z = t.scale * flat[:, t.coord]
            if t.kind == "sin":
                J[:, j, t.coord] = t.scale * np.cos(z)
            elif t.kind == "cos":
                J[:, j, t.coord] = -t.scale * np.sin(z)
            else:
                J[:, j, t.coord] = t.scale * np.exp(z)
        return J.reshape(*lead, self.p, d)

    def features_of(self, x):
        """Polymorphic evaluation: plain arrays or recorded `grad.Var`s."""
        if isinstance(x, grad.Var):
            return self._evaluate_var(x)
        return self.evaluate_many(x)

    def _evaluate_var(self, x: grad.Var) -> grad.Var:
        lead = x.value.shape[:-1]
        if x.value.shape[-1] != self.spec.dimension:
            raise DimensionMismatch(
                f"state has trailing dimension {x.value.shape[-1]},"
                f" library expects {self.spec.dimension}")
        cols = [grad.column(x, i) for i in range(self.spec.dimension)]
        ones = np.ones(lead)
        feats = []
        for t in self.terms:
            if t.kind == "poly":
                val = None
                for i, e in enumerate(t.exponents):
                    if e == 0:
                        continue
                    factor = cols[i] if e == 1 else cols[i] ** e
                    val = factor if val is None else val * factor
                feats.append(ones if val is None else val)
            else:
                z = cols[t.coord] * t.scale
                if t.kind == "sin":
                    feats.append(grad.sin(z))
                elif t.kind == "cos":
                    feats.append(grad.cos(z))
                else:
                    feats.append(grad.exp(z))
        return grad.stack_last(feats)


def build_library(spec: LibrarySpec) -> Library:
    """Assemble the ordered term list for `spec`.

    Raises
    ------
    EmptyLibrary
        If the specification yields zero terms.
    """
    spec.validate()
    d = spec.dimension
    terms = []
    if spec.include_constant:
        exps = (0,) * d
        terms.append(_Term("poly", _monomial_name(exps), exponents=exps))
    for deg in range(1, spec.polynomial_max_degree + 1):
        for combo in combinations_with_replacement(range(d), deg):
            exps = tuple(combo.count(i) for i in range(d))
            terms.append(_Term("poly", _monomial_name(exps), exponents=exps))
    for kind in ("sin", "cos"):
        for f in sorted(spec.trig_frequencies):
            for i in range(d):
                terms.append(_Term(kind, f"{kind}({_scaled_arg(f, i)})",
                                   coord=i, scale=f))
    for r in sorted(spec.exp_rates):
        for i in range(d):
            terms.append(_Term("exp", f"exp({_scaled_arg(r, i)})",
                               coord=i, scale=r))

    if not terms:
        raise EmptyLibrary("library specification yields no terms")

    n_poly = sum(1 for t in terms if t.kind == "poly")
    exponents = np.array([t.exponents for t in terms[:n_poly]], dtype=int)
    if n_poly == 0:
        exponents = np.zeros((0, d), dtype=int)
    return Library(spec=spec, terms=tuple(terms), p=len(terms),
                   names=tuple(t.name for t in terms),
                   _exponents=exponents, _n_poly=n_poly)


def evaluate(lib: Library, x) -> np.ndarray:
    """Feature row phi(x) for a single state vector, length p."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D state vector, got shape {x.shape}")
    return lib.evaluate_many(x[None, :])[0]


def jacobian(lib: Library, x) -> np.ndarray:
    """Analytic p x d matrix of partial derivatives d phi_j / d x_i."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D state vector, got shape {x.shape}")
    return lib.jacobian_many(x[None, :])[0]
