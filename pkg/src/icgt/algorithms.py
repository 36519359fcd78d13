"""Decentralized optimization updates and their parameter calculators.

The main method blends each node's own iterate with the (noisy) neighbor
average through an attenuation weight gamma in (0, 1/4),

    v_i = (1 - gamma) x_i + gamma * [w_ii x_i + sum_j w_ij phi(x_j)]
    x_i <- v_i - alpha y_i
    y_i <- (1 - gamma) y_i + gamma * [w_ii y_i + sum_j w_ij phi(y_j)]
           + grad_i(x_i_new, xi_new) - grad_i(x_i_old, xi_old)

where phi is the channel transformation and y_i is the gradient tracker.
Small gamma damps injected channel noise at the cost of slower consensus.
Baselines (dgd, stochastic gradient tracking, extra, near-dgd) mix with the
raw weights instead, which is what makes them sensitive to link noise.

In stacked matrix form, with Q' = (I - W) x I_d and Qhat = (W - diag W) x I_d,
one step reads v = (I - gamma Q') x + gamma Qhat eps, so the per-node loop
and the matrix recursion are the same computation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channels import ChannelModel, transmit_block
from .graphs import MixingMatrix, require_valid_mixing
from .objectives import GradientOracle, sample_gradient_block

VARIANTS = ("icgt", "gt", "dgd", "extra", "near_dgd")
GAMMA_MAX = 0.25


@dataclass
class AlgParams:
    variant: str
    alpha: float
    gamma: float = 0.1
    near_dgd_rounds: int = 1
    shared_noise: bool = False
    allow_gamma_override: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown algorithm variant {self.variant!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.near_dgd_rounds < 0:
            raise ValueError("near_dgd_rounds must be >= 0")
        if self.variant == "icgt" and not self.allow_gamma_override:
            if not (0.0 < self.gamma < GAMMA_MAX):
                raise ValueError(
                    f"gamma={self.gamma} outside the attenuation domain (0, {GAMMA_MAX}); "
                    "set allow_gamma_override to bypass"
                )


@dataclass
class AlgState:
    x: np.ndarray
    k: int = 0
    y: np.ndarray | None = None
    v: np.ndarray | None = None
    prev_grad: np.ndarray | None = None
    x_prev: np.ndarray | None = None
    mixed_prev: np.ndarray | None = None


@dataclass
class RunTrace:
    """Per-iteration log for analysis checks (opt-in; O(T n d) memory)."""

    alpha: float
    gamma: float
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    v: list = field(default_factory=list)
    eps_x: list = field(default_factory=list)
    eps_y: list = field(default_factory=list)
    grads: list = field(default_factory=list)  # grads[k] = sampled grad at x_k

    def log(self, x, y, v, eps_x, eps_y, grad):
        self.x.append(x.copy())
        self.y.append(y.copy())
        self.v.append(v.copy())
        self.eps_x.append(eps_x.copy())
        self.eps_y.append(eps_y.copy())
        self.grads.append(grad.copy())


def _q_hat(W: np.ndarray) -> np.ndarray:
    Qh = W.copy()
    np.fill_diagonal(Qh, 0.0)
    return Qh


def _noise(channel: ChannelModel, X: np.ndarray, k: int, *extra: int) -> np.ndarray | None:
    if channel.kind == "exact":
        return None
    return transmit_block(channel, X, k, *extra)[1]


def _attenuated_mix(W, Qh, Z, gamma, eps):
    out = (1.0 - gamma) * Z + gamma * _kernels.mix(W, Z)
    if eps is not None:
        out += gamma * _kernels.mix(Qh, eps)
    return out


def _raw_mix(W, Qh, Z, eps):
    out = _kernels.mix(W, Z)
    if eps is not None:
        out += _kernels.mix(Qh, eps)
    return out


def init_state(params: AlgParams, x0: np.ndarray, oracle: GradientOracle, objective) -> AlgState:
    """Initial state; tracker variants start with y = sampled gradients at x0."""
    x0 = np.array(x0, dtype=np.float64)
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    state = AlgState(x=x0)
    if params.variant in ("icgt", "gt"):
        g0 = sample_gradient_block(oracle, objective, x0, 0)
        state.y = g0.copy()
        state.prev_grad = g0
    return state


def icgt_step(state: AlgState, mixing: MixingMatrix, ch_x: ChannelModel, ch_y: ChannelModel,
              params: AlgParams, oracle: GradientOracle, objective,
              trace: RunTrace | None = None) -> AlgState:
    """One attenuated gradient-tracking step (two-phase: all transmissions
    are computed from the iteration-k state, then all updates applied)."""
    if params.variant != "icgt":
        raise ValueError("icgt_step requires variant 'icgt'")
    if not params.allow_gamma_override and not (0.0 < params.gamma < GAMMA_MAX):
        raise ValueError(f"gamma={params.gamma} outside (0, {GAMMA_MAX})")
    require_valid_mixing(mixing)
    W, Qh = mixing.W, _q_hat(mixing.W)
    k, gamma, alpha = state.k, params.gamma, params.alpha
    x, y = state.x, state.y

    eps_x = _noise(ch_x, x, k)
    eps_y = eps_x if params.shared_noise else _noise(ch_y, y, k)

    v = _attenuated_mix(W, Qh, x, gamma, eps_x)
    x_new = v - alpha * y
    g_new = sample_gradient_block(oracle, objective, x_new, k + 1)
    y_new = _attenuated_mix(W, Qh, y, gamma, eps_y) + g_new - state.prev_grad

    if trace is not None:
        n, d = x.shape
        zeros = np.zeros((n, d))
        trace.log(x, y, v,
                  eps_x if eps_x is not None else zeros,
                  eps_y if eps_y is not None else zeros,
                  state.prev_grad)
    return AlgState(x=x_new, k=k + 1, y=y_new, v=v, prev_grad=g_new)


def baseline_step(state: AlgState, mixing: MixingMatrix, ch_x: ChannelModel, ch_y: ChannelModel,
                  params: AlgParams, oracle: GradientOracle, objective,
                  trace: RunTrace | None = None) -> AlgState:
    """One step of a comparison algorithm (gt, dgd, extra, near_dgd).

    All of these mix through the raw weights, so off-diagonal contributions
    pass through the channel untouched by any attenuation.
    """
    require_valid_mixing(mixing)
    W, Qh = mixing.W, _q_hat(mixing.W)
    k, alpha = state.k, params.alpha
    x = state.x

    if params.variant == "gt":
        y = state.y
        eps_x = _noise(ch_x, x, k)
        eps_y = eps_x if params.shared_noise else _noise(ch_y, y, k)
        mixed_x = _raw_mix(W, Qh, x, eps_x)
        x_new = mixed_x - alpha * y
        g_new = sample_gradient_block(oracle, objective, x_new, k + 1)
        y_new = _raw_mix(W, Qh, y, eps_y) + g_new - state.prev_grad
        if trace is not None:
            n, d = x.shape
            zeros = np.zeros((n, d))
            trace.log(x, y, mixed_x,
                      eps_x if eps_x is not None else zeros,
                      eps_y if eps_y is not None else zeros,
                      state.prev_grad)
        return AlgState(x=x_new, k=k + 1, y=y_new, v=mixed_x, prev_grad=g_new)

    if params.variant == "dgd":
        g = sample_gradient_block(oracle, objective, x, k)
        x_new = _raw_mix(W, Qh, x, _noise(ch_x, x, k, 0)) - alpha * g
        return AlgState(x=x_new, k=k + 1)

    if params.variant == "near_dgd":
        xc = x
        for r in range(params.near_dgd_rounds):
            xc = _raw_mix(W, Qh, xc, _noise(ch_x, xc, k, r))
        g = sample_gradient_block(oracle, objective, x, k)
        return AlgState(x=xc - alpha * g, k=k + 1)

    if params.variant == "extra":
        g = sample_gradient_block(oracle, objective, x, k)
        mixed = _raw_mix(W, Qh, x, _noise(ch_x, x, k))
        if state.k == 0 or state.x_prev is None:
            x_new = mixed - alpha * g
        else:
            x_new = (x + mixed
                     - 0.5 * (state.x_prev + state.mixed_prev)
                     - alpha * (g - state.prev_grad))
        return AlgState(x=x_new, k=k + 1, x_prev=x, mixed_prev=mixed, prev_grad=g)

    raise ValueError(f"baseline_step cannot run variant {params.variant!r}")


def step(state, mixing, ch_x, ch_y, params, oracle, objective, trace=None) -> AlgState:
    if params.variant == "icgt":
        return icgt_step(state, mixing, ch_x, ch_y, params, oracle, objective, trace)
    return baseline_step(state, mixing, ch_x, ch_y, params, oracle, objective, trace)


def contraction_horizon(gamma: float, lambda2: float, delta: float = 1.0 / 16.0) -> int:
    """Number of composed steps after which the stacked error propagator is
    strictly contractive with squared norm at most ``delta``:

        tau = ceil( (2/g) * max(4 ln(2/g), g - ln(sqrt(delta)/4)) ),
        g = gamma (1 - lambda_2).
    """
    if not (0.0 < gamma < GAMMA_MAX):
        raise ValueError(f"gamma must lie in (0, {GAMMA_MAX})")
    if not (-1.0 < lambda2 < 1.0):
        raise ValueError("lambda2 must lie in (-1, 1)")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    g = gamma * (1.0 - lambda2)
    branch = max(4.0 * math.log(2.0 / g), g - math.log(math.sqrt(delta) / 4.0))
    return int(math.ceil((2.0 / g) * branch))


def max_step_size(tau: int, L: float) -> float:
    """Largest admissible step size for the convergence guarantee,
    min{1, 1/(161280 tau L)}.  Far smaller than tuned values in practice."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if L <= 0:
        raise ValueError("L must be positive")
    return min(1.0, 1.0 / (161280.0 * tau * L))


def gamma_schedule(alpha: float, T: float) -> float:
    """Attenuation schedule gamma = alpha * ln(T), clipped into (0, 1/4)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if T < 2:
        raise ValueError("T must be >= 2")
    return min(alpha * math.log(T), 0.2499)


def convergence_bound(dx0_star: float, psi0_norm_sq: float, alpha: float, gamma: float,
                      tau: int, L: float, mu: float, n: int,
                      sigma_g: float, sigma_c: float, T: int) -> float:
    """Upper bound on E||xbar_T - x*||^2 for the attenuated tracking method.

    Three parts: a geometric term in the initial suboptimality and initial
    stacked consensus error, a gradient-noise floor, and a communication-
    noise floor.  sigma_g and sigma_c are per-vector noise levels
    (E||noise||^2 <= sigma^2 per node per iteration).
    """
    if not (0.0 < gamma < GAMMA_MAX) or alpha > max_step_size(tau, L):
        warnings.warn(
            "parameters outside the guarantee domain "
            f"(alpha={alpha:.3e} vs alpha_max={max_step_size(tau, L):.3e}, gamma={gamma}); "
            "bound computed anyway",
            stacklevel=2,
        )
    decay = 1.0 - alpha * mu / 4.0
    geometric = decay**T * (
        dx0_star + 800.0 * (1.0 + tau**2) * L / (n * decay * mu) * psi0_norm_sq
    )
    grad_term = (4.0 * alpha / mu + 101920.0 * L * (tau + 1.0) * n * alpha**2 / mu) * (
        sigma_g**2 / n
    )
    comm_term = (
        4.0 * (1.0 + 2.0 * T * alpha / mu) / mu * gamma**2 / alpha
        + 33280.0 * (2.0 + alpha**2 * (tau**2 + 0.5) + alpha**2 * T) * L / mu * n * tau * gamma**2
    ) * (sigma_c**2 / n)
    return geometric + grad_term + comm_term
