"""Reverse-mode automatic differentiation over recorded array operations.

A `Tape` records elementary operations (+, -, *, /, powers with constant
exponent, sin, cos, exp, tanh, plus the array plumbing those need:
matmul, reshape, column extraction, stacking, summation).  Running the
backward sweep in reverse recording order visits each node exactly once
and accumulates exact gradients for every leaf parameter.

Operations are polymorphic: applied to plain ndarrays they just compute,
applied to `Var`s they record.  A loss written once therefore serves both
as the value function (for finite-difference checking) and the recorded
program (for reverse-mode gradients).
"""

import numpy as np

from .errors import NonFiniteValue

__all__ = ["Tape", "Var", "gradient", "value_and_gradient", "finite_difference",
           "sin", "cos", "exp", "tanh", "absval", "matmul", "total",
           "reshape", "column", "stack_last", "custom"]


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce gradient `g` back to `shape` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Var:
    """Array-valued node on a tape."""

    __slots__ = ("value", "tape", "parents", "_backward", "grad")
    __array_ufunc__ = None  # keep numpy from hijacking mixed operations

    def __init__(self, value, tape, parents=(), backward=None):
        self.value = np.asarray(value, dtype=float)
        self.tape = tape
        self.parents = parents
        self._backward = backward
        self.grad = None
        tape._nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        a, b = self, other
        if isinstance(b, Var):
            return Var(a.value + b.value, a.tape, (a, b),
                       lambda g: (_unbroadcast(g, a.value.shape),
                                  _unbroadcast(g, b.value.shape)))
        b = np.asarray(b, dtype=float)
        return Var(a.value + b, a.tape, (a,),
                   lambda g: (_unbroadcast(g, a.value.shape),))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, self.tape, (self,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, Var):
            a, b = self, other
            return Var(a.value - b.value, a.tape, (a, b),
                       lambda g: (_unbroadcast(g, a.value.shape),
                                  _unbroadcast(-g, b.value.shape)))
        b = np.asarray(other, dtype=float)
        return Var(self.value - b, self.tape, (self,),
                   lambda g: (_unbroadcast(g, self.value.shape),))

    def __rsub__(self, other):
        b = np.asarray(other, dtype=float)
        return Var(b - self.value, self.tape, (self,),
                   lambda g: (_unbroadcast(-g, self.value.shape),))

    def __mul__(self, other):
        a = self
        if isinstance(other, Var):
            b = other
            return Var(a.value * b.value, a.tape, (a, b),
                       lambda g: (_unbroadcast(g * b.value, a.value.shape),
                                  _unbroadcast(g * a.value, b.value.shape)))
        b = np.asarray(other, dtype=float)
        return Var(a.value * b, a.tape, (a,),
                   lambda g: (_unbroadcast(g * b, a.value.shape),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        a = self
        if isinstance(other, Var):
            b = other
            return Var(a.value / b.value, a.tape, (a, b),
                       lambda g: (_unbroadcast(g / b.value, a.value.shape),
                                  _unbroadcast(-g * a.value / b.value ** 2,
                                               b.value.shape)))
        b = np.asarray(other, dtype=float)
        return Var(a.value / b, a.tape, (a,),
                   lambda g: (_unbroadcast(g / b, a.value.shape),))

    def __rtruediv__(self, other):
        b = np.asarray(other, dtype=float)
        return Var(b / self.value, self.tape, (self,),
                   lambda g: (_unbroadcast(-g * b / self.value ** 2,
                                           self.value.shape),))

    def __pow__(self, exponent):
        if isinstance(exponent, Var):
            raise TypeError("only constant exponents are supported")
        e = float(exponent)
        val = self.value ** e
        if e == int(e):
            dval = e * self.value ** (int(e) - 1) if e != 0 else np.zeros_like(self.value)
        else:
            dval = e * self.value ** (e - 1.0)
        return Var(val, self.tape, (self,), lambda g: (g * dval,))


class Tape:
    """Container recording a single forward computation."""

    def __init__(self):
        self._nodes = []

    def var(self, value) -> Var:
        """Create a leaf node (a parameter to differentiate against)."""
        return Var(value, self)

    def backward(self, output: Var):
        """Accumulate gradients of the scalar `output` into every node."""
        if output.value.size != 1:
            raise ValueError("backward expects a scalar output node")
        for node in self._nodes:
            node.grad = None
        output.grad = np.ones_like(output.value)
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            contributions = node._backward(node.grad)
            for parent, contrib in zip(node.parents, contributions):
                if contrib is None:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.value)
                parent.grad = parent.grad + contrib


# -- elementary functions (polymorphic over Var / ndarray) ----------------

def sin(x):
    if not isinstance(x, Var):
        return np.sin(x)
    return Var(np.sin(x.value), x.tape, (x,),
               lambda g, c=np.cos(x.value): (g * c,))


def cos(x):
    if not isinstance(x, Var):
        return np.cos(x)
    return Var(np.cos(x.value), x.tape, (x,),
               lambda g, s=np.sin(x.value): (-g * s,))


def exp(x):
    if not isinstance(x, Var):
        return np.exp(x)
    val = np.exp(x.value)
    return Var(val, x.tape, (x,), lambda g: (g * val,))


def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    val = np.tanh(x.value)
    return Var(val, x.tape, (x,), lambda g: (g * (1.0 - val * val),))


def absval(x):
    """|x| with sign subgradient (0 at 0); used by the l1 penalty."""
    if not isinstance(x, Var):
        return np.abs(x)
    sign = np.sign(x.value)
    return Var(np.abs(x.value), x.tape, (x,), lambda g: (g * sign,))


def matmul(a, b):
    """Matrix product with numpy batching; operands must be >= 2-D."""
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=float)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=float)
    if av.ndim < 2 or bv.ndim < 2:
        raise ValueError("matmul operands must have at least 2 dimensions")
    val = av @ bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return val
    tape = a.tape if isinstance(a, Var) else b.tape
    parents, slots = [], []
    if isinstance(a, Var):
        parents.append(a)
        slots.append("a")
    if isinstance(b, Var):
        parents.append(b)
        slots.append("b")

    def backward(g):
        out = []
        for slot in slots:
            if slot == "a":
                out.append(_unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape))
            else:
                out.append(_unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape))
        return tuple(out)

    return Var(val, tape, tuple(parents), backward)


def total(x):
    """Sum of all entries, as a scalar."""
    if not isinstance(x, Var):
        return float(np.sum(x))
    shape = x.value.shape
    return Var(np.sum(x.value), x.tape, (x,),
               lambda g: (np.broadcast_to(g, shape).copy(),))


def reshape(x, shape):
    if not isinstance(x, Var):
        return np.reshape(x, shape)
    old = x.value.shape
    return Var(x.value.reshape(shape), x.tape, (x,),
               lambda g: (g.reshape(old),))


def column(x, index):
    """Extract x[..., index] along the last axis."""
    if not isinstance(x, Var):
        return np.asarray(x)[..., index]

    def backward(g):
        gx = np.zeros_like(x.value)
        gx[..., index] = g
        return (gx,)

    return Var(x.value[..., index], x.tape, (x,), backward)


def stack_last(items):
    """Stack scalars-per-state arrays along a new trailing axis.

    Accepts a mix of `Var`s and constant ndarrays; gradients flow only
    into the `Var` entries.
    """
    values = [it.value if isinstance(it, Var) else np.asarray(it, dtype=float)
              for it in items]
    if not any(isinstance(it, Var) for it in items):
        return np.stack(values, axis=-1)
    tape = next(it.tape for it in items if isinstance(it, Var))
    var_slots = [k for k, it in enumerate(items) if isinstance(it, Var)]
    parents = tuple(items[k] for k in var_slots)

    def backward(g):
        return tuple(g[..., k] for k in var_slots)

    return Var(np.stack(values, axis=-1), tape, parents, backward)


def custom(tape: Tape, value, parents, backward) -> Var:
    """Record a node with a user-supplied backward rule.

    `backward(g)` must return one gradient per parent (or None).  Used for
    implicitly defined quantities whose adjoint is solved directly instead
    of unrolling the computation that produced them.
    """
    return Var(value, tape, tuple(parents), backward)


# -- user-facing gradient interfaces ---------------------------------------

def _as_param_list(parameters):
    if isinstance(parameters, np.ndarray):
        return [parameters], True
    return list(parameters), False


def value_and_gradient(loss_program, parameters):
    """Record `loss_program(*parameters)` and return (value, gradients)."""
    params, single = _as_param_list(parameters)
    tape = Tape()
    leaves = [tape.var(p) for p in params]
    out = loss_program(*leaves)
    if not isinstance(out, Var):
        raise TypeError("loss program must depend on its parameters")
    val = float(out.value)
    if not np.isfinite(val):
        raise NonFiniteValue(f"loss evaluated to {val}")
    tape.backward(out)
    grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
             for leaf in leaves]
    return val, (grads[0] if single else grads)


def gradient(loss_program, parameters):
    """Exact reverse-mode gradient of a recorded scalar loss.

    Parameters
    ----------
    loss_program : callable
        Receives one `Var` per parameter array and must return a scalar
        `Var` built from the operations in this module.
    parameters : ndarray or sequence of ndarray
        Points at which to differentiate; the result matches this
        structure and the shapes of its entries.
    """
    _, grads = value_and_gradient(loss_program, parameters)
    return grads


def finite_difference(loss_function, parameters, step):
    """Central-difference gradient estimate, coordinate by coordinate.

    `loss_function` receives plain ndarrays and must return a float.
    Serves as the independent oracle for `gradient`.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    params, single = _as_param_list(parameters)
    params = [np.array(p, dtype=float) for p in params]
    grads = [np.zeros_like(p) for p in params]
    for k, p in enumerate(params):
        flat = p.reshape(-1)
        gflat = grads[k].reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            hi = float(loss_function(*params))
            flat[i] = keep - step
            lo = float(loss_function(*params))
            flat[i] = keep
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NonFiniteValue("loss not finite at perturbed parameters")
            gflat[i] = (hi - lo) / (2.0 * step)
    return grads[0] if single else grads
