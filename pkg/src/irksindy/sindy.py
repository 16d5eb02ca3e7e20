"""Sparse regression over implicit Runge-Kutta predictions.

The coefficient matrix xi is fit by minimizing the weighted squared
mismatch between the trajectory samples and their one-step backward and
forward reconstructions,

    loss(xi) = alpha * ||XL - XL_pred(Phi xi)||_F^2
             + (1 - alpha) * ||XR - XR_pred(Phi xi)||_F^2,

optionally plus an l1 penalty, with Adam updates and hard sequential
thresholding: after each round every coefficient below the threshold is
zeroed and frozen, so the active set only ever shrinks.  Two drivers are
provided -- `discover_irk` solves the stage equations each epoch, while
`discover_deep` trains an auxiliary network that predicts the stage
values and scores them through the per-stage endpoint reconstructions.
"""

from dataclasses import dataclass, field

import numpy as np

from . import grad, irk, net
from .coefficients import CoefficientMatrix
from .errors import (ConfigError, DimensionMismatch, EmptyDataset,
                     ShapeMismatch)
from .features import Library
from .irk import SolverSettings

__all__ = ["CoefficientMatrix", "SindyConfig", "AdamState", "DiscoveredModel",
           "loss_irk", "loss_deep", "regularize", "adam_step", "threshold",
           "discover_irk", "discover_rk4", "discover_deep", "fit_stage_network"]


@dataclass
class SindyConfig:
    """Training schedule and loss weights.

    lam is the hard threshold; lr_decay multiplies both learning rates
    after every thresholding round.  epochs_first applies to round one,
    epochs_rest to every later round.
    """

    alpha: float = 0.5
    lam: float = 0.05
    reg: str = "none"
    l1_weight: float = 0.0
    lr_xi: float = 0.01
    lr_theta: float = 1e-3
    lr_decay: float = 0.8
    thresholding_iterations: int = 3
    epochs_first: int = 1000
    epochs_rest: int = 1000
    solver: SolverSettings = field(default_factory=SolverSettings)
    stages: int | None = None
    seed: int = 0
    alignment: str = "paired"
    net_input: str = "tx"

    def validate(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.lam < 1.0:
            raise ConfigError(f"threshold must lie in [0, 1), got {self.lam}")
        if self.reg not in ("none", "l1"):
            raise ConfigError(f"unknown regularization {self.reg!r}")
        if self.lr_xi <= 0 or self.lr_theta <= 0:
            raise ConfigError("learning rates must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.thresholding_iterations < 1:
            raise ConfigError("need at least one thresholding round")
        if self.epochs_first < 1 or self.epochs_rest < 1:
            raise ConfigError("epoch budgets must be >= 1")
        if self.alignment not in ("paired", "literal"):
            raise ConfigError(f"unknown alignment {self.alignment!r}")
        if self.net_input not in ("tx", "x"):
            raise ConfigError(f"net_input must be 'tx' or 'x', got {self.net_input!r}")


@dataclass
class AdamState:
    """First/second moment estimates for one parameter array."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_array(cls, arr: np.ndarray) -> "AdamState":
        return cls(first_moment=np.zeros_like(arr),
                   second_moment=np.zeros_like(arr))


@dataclass
class DiscoveredModel:
    """Result of a discovery run."""

    library_spec: object
    xi_star: CoefficientMatrix
    scaling: object | None
    training_history: np.ndarray
    term_report: list

    @property
    def all_terms_eliminated(self) -> bool:
        return not bool(self.xi_star.active_mask.any())


def _term_report(lib: Library, xi: CoefficientMatrix):
    report = []
    for col in range(xi.d):
        entries = [(lib.names[row], float(xi.xi[row, col]))
                   for row in range(xi.p) if xi.xi[row, col] != 0.0]
        report.append(entries)
    return report


def _as_xi_array(xi):
    return xi.xi if isinstance(xi, CoefficientMatrix) else np.asarray(xi, dtype=float)


# -- losses -----------------------------------------------------------------

def _check_dataset(lib: Library, ds):
    if ds.m < 1:
        raise EmptyDataset("loss needs at least one sample interval")
    if ds.d != lib.dimension:
        raise DimensionMismatch(
            f"dataset dimension {ds.d} does not match library dimension"
            f" {lib.dimension}")


def _prediction_loss(xi_obj, lib, ds, tab, config, settings, stepping="irk"):
    """Weighted squared backward/forward reconstruction mismatch.

    Polymorphic: evaluates with arrays, records with tape variables.
    """
    X, h = ds.X, ds.h
    target_left, target_right = X[:-1], X[1:]
    base_back = X[1:] if config.alignment == "paired" else X[:-1]
    if stepping == "rk4":
        pred_fwd = irk.rk4_step_batch(xi_obj, lib, X[:-1], h)
        pred_bwd = irk.rk4_step_batch(xi_obj, lib, base_back, -h)
    else:
        pred_fwd = irk._step_batch(xi_obj, lib, X[:-1], h, tab, settings)
        pred_bwd = irk._step_batch(xi_obj, lib, base_back, -h, tab, settings)
    rb = target_left - pred_bwd
    rf = target_right - pred_fwd
    return config.alpha * grad.total(rb * rb) \
        + (1.0 - config.alpha) * grad.total(rf * rf)


def loss_irk(xi, lib: Library, ds, tab, config: SindyConfig,
             solver: SolverSettings | None = None) -> float:
    """Stage-solving loss: both prediction directions from solved stages."""
    _check_dataset(lib, ds)
    settings = solver if solver is not None else config.solver
    return float(_prediction_loss(_as_xi_array(xi), lib, ds, tab, config,
                                  settings))


def _net_inputs(ds, config):
    if config.net_input == "x":
        return ds.X[:-1]
    t_enc = net.encode_time(ds.t[:-1], float(ds.t[0]), float(ds.t[-1]))
    return np.concatenate([t_enc[:, None], ds.X[:-1]], axis=1)


def _deep_loss_core(xi_obj, weights, biases, arch, lib, ds, tab, config):
    m, d, s = ds.m, ds.d, tab.s
    inputs = _net_inputs(ds, config)
    if inputs.shape[1] != arch.layer_sizes[0]:
        raise DimensionMismatch(
            f"network expects input width {arch.layer_sizes[0]},"
            f" got {inputs.shape[1]}")
    if arch.output_width != s * d:
        raise DimensionMismatch(
            f"network output width {arch.output_width} must equal s*d = {s * d}")
    out = net.forward_core(arch, inputs, weights=weights, biases=biases)
    chi = grad.reshape(out, (m, s, d))
    f = grad.matmul(lib.features_of(chi), xi_obj)           # (m, s, d)
    h3 = ds.h[:, None, None]
    left = chi - h3 * grad.matmul(tab.A, f)
    right = chi + h3 * grad.matmul(tab.b[None, :] - tab.A, f)
    rl = ds.X[:-1][:, None, :] - left                       # every stage row
    rr = ds.X[1:][:, None, :] - right
    return config.alpha * grad.total(rl * rl) \
        + (1.0 - config.alpha) * grad.total(rr * rr)


def loss_deep(xi, theta: net.MlpParams, lib: Library, ds, tab,
              config: SindyConfig) -> float:
    """Network-stage loss: all s endpoint reconstructions per interval."""
    _check_dataset(lib, ds)
    return float(_deep_loss_core(_as_xi_array(xi), theta.weights, theta.biases,
                                 theta, lib, ds, tab, config))


def regularize(loss, xi, config: SindyConfig):
    """Apply the configured coefficient penalty to a loss value/node."""
    if config.reg == "none":
        return loss
    if config.reg == "l1":
        return loss + config.l1_weight * grad.total(grad.absval(xi))
    raise ConfigError(f"unknown regularization {config.reg!r}")


# -- optimization -------------------------------------------------------------

def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              lr: float, mask: np.ndarray | None = None):
    """One bias-corrected Adam update, in place; returns (params, state).

    With a mask, inactive entries receive no update and their moments are
    pinned at zero.
    """
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ShapeMismatch(
            f"params {params.shape}, grads {grads.shape},"
            f" moments {state.first_moment.shape} disagree")
    g = grads if mask is None else grads * mask
    state.step_count += 1
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * g
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * (g * g)
    if mask is not None:
        state.first_moment *= mask
        state.second_moment *= mask
    m_hat = state.first_moment / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.second_moment / (1.0 - state.beta2 ** state.step_count)
    update = lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if mask is not None:
        update *= mask
    params -= update
    return params, state


def threshold(xi: CoefficientMatrix, lam: float) -> CoefficientMatrix:
    """Zero and deactivate every entry with |value| < lam.

    Entries already inactive stay inactive, so thresholding is idempotent
    and the support is non-increasing across rounds.
    """
    if lam < 0:
        raise ConfigError(f"threshold must be nonnegative, got {lam}")
    keep = xi.active_mask & (np.abs(xi.xi) >= lam)
    return CoefficientMatrix(np.where(keep, xi.xi, 0.0), keep)


# -- discovery drivers --------------------------------------------------------

def _check_tab(tab, config):
    if config.stages is not None and tab is not None and config.stages != tab.s:
        raise ConfigError(
            f"config stages {config.stages} disagree with tableau s={tab.s}")


def _drive_xi(ds, lib, tab, config, stepping):
    config.validate()
    _check_dataset(lib, ds)
    _check_tab(tab, config)
    xi = CoefficientMatrix(np.zeros((lib.p, ds.d)))
    state = AdamState.for_array(xi.xi)
    lr = config.lr_xi
    history = []

    def program(xi_var):
        base = _prediction_loss(xi_var, lib, ds, tab, config, config.solver,
                                stepping=stepping)
        return regularize(base, xi_var, config)

    for rnd in range(config.thresholding_iterations):
        epochs = config.epochs_first if rnd == 0 else config.epochs_rest
        for _ in range(epochs):
            value, g = grad.value_and_gradient(program, xi.xi)
            adam_step(xi.xi, g, state, lr, mask=xi.active_mask)
            history.append(value)
        xi = threshold(xi, config.lam)
        lr *= config.lr_decay
        if not xi.active_mask.any():
            break

    return DiscoveredModel(library_spec=lib.spec, xi_star=xi, scaling=None,
                           training_history=np.asarray(history),
                           term_report=_term_report(lib, xi))


def discover_irk(ds, lib: Library, tab, config: SindyConfig) -> DiscoveredModel:
    """Gradient-based sequential thresholding with solved IRK stages.

    Runs `thresholding_iterations` rounds; each minimizes the (optionally
    regularized) loss over the active coefficients by Adam, then hard-
    thresholds.  Deterministic for a given configuration.  A model whose
    support emptied out is returned, not raised (`all_terms_eliminated`).
    """
    return _drive_xi(ds, lib, tab, config, stepping="irk")


def discover_rk4(ds, lib: Library, config: SindyConfig) -> DiscoveredModel:
    """Same pipeline with the classical explicit fourth-order step;
    the baseline the implicit variant is measured against."""
    return _drive_xi(ds, lib, None, config, stepping="rk4")


def discover_deep(ds, lib: Library, tab, config: SindyConfig,
                  arch: net.MlpParams):
    """Joint training of the stage network and the coefficients.

    Both parameter sets take Adam steps each epoch (lr_theta for the
    network, lr_xi for the coefficient matrix); thresholding touches the
    coefficients only.  Returns (DiscoveredModel, trained MlpParams).
    """
    config.validate()
    _check_dataset(lib, ds)
    _check_tab(tab, config)
    theta = arch.copy()
    if theta.output_width != tab.s * ds.d:
        raise DimensionMismatch(
            f"network output width {theta.output_width} must equal"
            f" s*d = {tab.s * ds.d}")
    xi = CoefficientMatrix(np.zeros((lib.p, ds.d)))
    theta_list = theta.as_list()
    xi_state = AdamState.for_array(xi.xi)
    theta_states = [AdamState.for_array(p) for p in theta_list]
    lr_xi, lr_theta = config.lr_xi, config.lr_theta
    history = []

    def program(xi_var, *theta_vars):
        base = _deep_loss_core(xi_var, list(theta_vars[0::2]),
                               list(theta_vars[1::2]), theta, lib, ds, tab,
                               config)
        return regularize(base, xi_var, config)

    for rnd in range(config.thresholding_iterations):
        epochs = config.epochs_first if rnd == 0 else config.epochs_rest
        for _ in range(epochs):
            value, grads = grad.value_and_gradient(program, [xi.xi] + theta_list)
            adam_step(xi.xi, grads[0], xi_state, lr_xi, mask=xi.active_mask)
            for p, g, st in zip(theta_list, grads[1:], theta_states):
                adam_step(p, g, st, lr_theta)
            history.append(value)
        xi = threshold(xi, config.lam)
        lr_xi *= config.lr_decay
        lr_theta *= config.lr_decay

    model = DiscoveredModel(library_spec=lib.spec, xi_star=xi, scaling=None,
                            training_history=np.asarray(history),
                            term_report=_term_report(lib, xi))
    return model, theta


def fit_stage_network(ds, f, tab, arch: net.MlpParams, config: SindyConfig,
                      epochs: int = 20000, lr: float = 1e-3,
                      decay_every: int = 5000, decay: float = 0.7):
    """Pre-fit the stage network to the solved stage values of a known field.

    Solves the stage systems of every interval with Newton, then regresses
    the network outputs onto them by Adam.  Returns (theta, final mse).
    Useful for warm starts and for checking the network-loss consistency.
    """
    lib, xi = irk._split_field(f)
    chi, _, _ = irk._solve_batch(lib, xi, ds.X[:-1], ds.h, tab,
                                 SolverSettings(method="newton"))
    targets = chi.reshape(ds.m, tab.s * ds.d)
    inputs = _net_inputs(ds, config)
    theta = arch.copy()
    theta_list = theta.as_list()
    states = [AdamState.for_array(p) for p in theta_list]

    def program(*theta_vars):
        out = net.forward_core(theta, inputs, weights=list(theta_vars[0::2]),
                               biases=list(theta_vars[1::2]))
        r = targets - out
        return grad.total(r * r)

    value = np.inf
    for epoch in range(epochs):
        value, grads = grad.value_and_gradient(program, theta_list)
        for p, g, st in zip(theta_list, grads, states):
            adam_step(p, g, st, lr)
        if decay_every and (epoch + 1) % decay_every == 0:
            lr *= decay
    return theta, value / targets.size
