"""Butcher tableaus for s-stage Gauss-Legendre collocation methods.

An s-stage Gauss method places its abscissae at the roots of the degree-s
Legendre polynomial shifted to [0, 1].  The quadrature weights follow from
the classical derivative formula, and the stage coefficient matrix is the
integral of each Lagrange basis polynomial from 0 to each node,

    A[i, j] = integral_0^{c_i} L_j(tau) dtau,

which yields the unique collocation method of order 2s.  Everything is
computed in double precision with deterministic arithmetic, so repeated
calls are bit-identical.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OrderExceedsMethod, StageCountOutOfRange

# Lagrange-basis integration in double precision degrades past this point;
# raise it only together with a higher-precision construction path.
MAX_STAGES = 64

_ROOT_TOL = 1e-14
_ROOT_MAX_ITER = 100


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients (A, b, c) of an s-stage Runge-Kutta method.

    Attributes
    ----------
    s : int
        Stage count.
    c : ndarray, shape (s,)
        Abscissae, strictly increasing in (0, 1).
    b : ndarray, shape (s,)
        Quadrature weights; sums to 1.
    A : ndarray, shape (s, s)
        Stage coefficient matrix; row i sums to c[i].
    """

    s: int
    c: np.ndarray
    b: np.ndarray
    A: np.ndarray


def _legendre_and_derivative(n: int, x: np.ndarray):
    """Evaluate P_n and P_n' on [-1, 1] by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        p_prev, p = p, p_next
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def _legendre_roots(n: int):
    """Roots of P_n on (-1, 1) by Newton iteration from Chebyshev estimates."""
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (4 * k - 1) / (4 * n + 2))
    for _ in range(_ROOT_MAX_ITER):
        p, dp = _legendre_and_derivative(n, x)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < _ROOT_TOL:
            break
    return x


def _lagrange_values(nodes: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Values L_j(tau) of the Lagrange basis on `nodes`; shape (len(tau), s)."""
    s = nodes.size
    out = np.ones((tau.size, s))
    for j in range(s):
        for k in range(s):
            if k != j:
                out[:, j] *= (tau - nodes[k]) / (nodes[j] - nodes[k])
    return out


def gauss_tableau(s: int) -> ButcherTableau:
    """Construct the s-stage Gauss collocation tableau (order 2s).

    Parameters
    ----------
    s : int
        Stage count, 1 <= s <= MAX_STAGES.

    Raises
    ------
    StageCountOutOfRange
        If s is outside [1, MAX_STAGES].
    """
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
        raise StageCountOutOfRange(f"stage count must be an integer, got {s!r}")
    if s < 1 or s > MAX_STAGES:
        raise StageCountOutOfRange(
            f"stage count {s} outside supported range [1, {MAX_STAGES}]")
    s = int(s)

    x = _legendre_roots(s)
    _, dp = _legendre_and_derivative(s, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # shift [-1, 1] -> [0, 1]; Chebyshev seeds come out in descending order
    c = np.sort((x + 1.0) / 2.0)
    order = np.argsort((x + 1.0) / 2.0)
    b = (w / 2.0)[order]

    # A[i, j] = int_0^{c_i} L_j; the s-point Gauss rule rescaled onto
    # [0, c_i] is exact for the degree s-1 integrand
    A = np.empty((s, s))
    for i in range(s):
        L = _lagrange_values(c, c[i] * c)
        A[i, :] = c[i] * (b @ L)

    return ButcherTableau(s=s, c=c, b=b, A=A)


def verify_order_conditions(tab: ButcherTableau, order: int) -> float:
    """Max residual of the quadrature conditions B(order) and the
    collocation conditions C(s).

    B(q):  sum_i b_i c_i^{q-1} = 1/q            for q = 1..order
    C(q):  sum_j A[i,j] c_j^{q-1} = c_i^q / q   for q = 1..s, all i

    Raises
    ------
    OrderExceedsMethod
        If order > 2s, beyond what a Gauss method can satisfy.
    """
    if order < 1:
        raise OrderExceedsMethod(f"order must be positive, got {order}")
    if order > 2 * tab.s:
        raise OrderExceedsMethod(
            f"order {order} exceeds method order {2 * tab.s} (s={tab.s})")

    worst = 0.0
    for q in range(1, order + 1):
        res = abs(float(tab.b @ tab.c ** (q - 1)) - 1.0 / q)
        worst = max(worst, res)
    for q in range(1, tab.s + 1):
        res = np.max(np.abs(tab.A @ tab.c ** (q - 1) - tab.c ** q / q))
        worst = max(worst, float(res))
    return worst
