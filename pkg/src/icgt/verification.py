"""Numerical verification of the convergence analysis.

The stacked consensus errors psi_k = (v_k - vbar_k, x_k - xbar_k,
alpha (y_k - ybar_k)) of the attenuated tracking method obey an exact linear
recursion psi_k = J psi_{k-1} + alpha E_{k-1} when both channels share one
noise realization per iteration.  This module builds J explicitly, evaluates
its closed-form powers, certifies the tau-step contraction, replays recorded
traces through the recursion, checks the auxiliary scalar-recursion bound,
and Monte-Carlo-tests the noise floor of pure attenuated averaging.

Everything here is dense linear algebra on matrices of size at most 3*n*d,
which stays in the hundreds at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithms import RunTrace, contraction_horizon
from .graphs import spectrum
from .rng import substream


def projector(n: int, d: int) -> np.ndarray:
    """Centering projector: subtracts the across-node average per coordinate."""
    return np.kron(np.eye(n) - np.ones((n, n)) / n, np.eye(d))


def q_prime(W: np.ndarray, d: int) -> np.ndarray:
    n = W.shape[0]
    return np.kron(np.eye(n) - W, np.eye(d))


def q_hat(W: np.ndarray, d: int) -> np.ndarray:
    return np.kron(W - np.diag(np.diag(W)), np.eye(d))


def q_tilde(W: np.ndarray, d: int) -> np.ndarray:
    return projector(W.shape[0], d) @ q_hat(W, d)


def _a_small(W: np.ndarray, gamma: float) -> np.ndarray:
    """The n x n core of the contraction block: (I - 11'/n) - gamma (I - W)."""
    n = W.shape[0]
    return (np.eye(n) - np.ones((n, n)) / n) - gamma * (np.eye(n) - W)


def _a_small_power(W: np.ndarray, gamma: float, tau: int) -> np.ndarray:
    """Spectral evaluation of the core raised to tau (symmetric, so exact)."""
    vals, vecs = np.linalg.eigh(_a_small(W, gamma))
    return (vecs * vals**tau) @ vecs.T


@dataclass(frozen=True)
class ErrorPropagator:
    """The 3-block matrix J driving the stacked consensus-error recursion."""

    n: int
    d: int
    gamma: float
    A: np.ndarray        # center-and-attenuate block, (nd, nd)
    full: np.ndarray     # (3nd, 3nd)
    proj: np.ndarray     # centering projector
    Qp: np.ndarray
    Qh: np.ndarray
    Qt: np.ndarray


def error_propagator(W: np.ndarray, d: int, gamma: float) -> ErrorPropagator:
    """Assemble J = [[A, 0, -A], [0, A, -P], [0, 0, A]] with
    A = P - gamma Q' and P the centering projector.

    gamma = 0 is admitted for the degenerate no-contraction case (||J|| >= 1).
    """
    W = np.asarray(W, dtype=np.float64)
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    n = W.shape[0]
    P = projector(n, d)
    Qp = q_prime(W, d)
    A = P - gamma * Qp
    nd = n * d
    Z = np.zeros((nd, nd))
    full = np.block([[A, Z, -A], [Z, A, -P], [Z, Z, A]])
    return ErrorPropagator(n=n, d=d, gamma=gamma, A=A, full=full, proj=P,
                           Qp=Qp, Qh=q_hat(W, d), Qt=q_tilde(W, d))


def propagator_power(W: np.ndarray, d: int, gamma: float, tau: int) -> np.ndarray:
    """Closed form for J^tau: [[A^t, 0, -t A^t], [0, A^t, -t A^(t-1)], [0, 0, A^t]].

    Restricted to tau >= 2: at tau = 1 the middle-right block degenerates to
    A^0, whose meaning (identity vs projector) is ambiguous, while J itself
    carries the projector there.
    """
    if tau < 2:
        raise ValueError("closed-form power requires tau >= 2")
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    Atau = np.kron(_a_small_power(W, gamma, tau), np.eye(d))
    Atau1 = np.kron(_a_small_power(W, gamma, tau - 1), np.eye(d))
    nd = n * d
    Z = np.zeros((nd, nd))
    return np.block([[Atau, Z, -tau * Atau], [Z, Atau, -tau * Atau1], [Z, Z, Atau]])


def matrix_power_brute(M: np.ndarray, tau: int) -> np.ndarray:
    """Repeated multiplication, used as the oracle for the closed form."""
    out = np.eye(M.shape[0])
    for _ in range(tau):
        out = M @ out
    return out


def operator_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False)[0])


@dataclass(frozen=True)
class ContractionCheck:
    tau: int
    norm_sq: float
    passed: bool


def verify_contraction(W: np.ndarray, d: int, gamma: float, delta: float = 1.0 / 16.0) -> ContractionCheck:
    """Certify ||J^tau||^2 <= delta with tau from ``contraction_horizon``."""
    lam2 = spectrum(W).lambda2
    tau = contraction_horizon(gamma, lam2, delta)
    norm_sq = operator_norm(propagator_power(W, d, gamma, tau)) ** 2
    return ContractionCheck(tau=tau, norm_sq=norm_sq, passed=bool(norm_sq <= delta))


def power_difference_max_norm(W: np.ndarray, d: int, gamma: float, i_max: int) -> float:
    """max_{0 <= i <= i_max} ||(i+1) A^(i+1) P - i A^i P||^2.

    The analysis uses that this stays at most 4 whenever
    gamma (1 - lambda_j) lies in [0, 1] for every eigenvalue lambda_j.
    """
    vals, vecs = np.linalg.eigh(_a_small(W, gamma))
    Id = np.eye(d)
    P = projector(W.shape[0], d)
    worst = 0.0
    for i in range(i_max + 1):
        Ai = (vecs * vals**i) @ vecs.T
        Ai1 = (vecs * vals ** (i + 1)) @ vecs.T
        M = np.kron((i + 1) * Ai1 - i * Ai, Id) @ P
        worst = max(worst, operator_norm(M) ** 2)
    return worst


def stack_errors(v: np.ndarray, x: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """psi = (v - vbar; x - xbar; alpha (y - ybar)), flattened node-major."""
    def centered(Z):
        return (Z - Z.mean(axis=0, keepdims=True)).ravel()
    return np.concatenate([centered(v), centered(x), alpha * centered(y)])


@dataclass(frozen=True)
class ResidualReport:
    residuals: np.ndarray   # ||psi_k - (J psi_{k-1} + alpha E_{k-1})|| for k >= 1
    max_residual: float
    max_psi_norm: float


def recursion_residual(trace: RunTrace, W: np.ndarray) -> ResidualReport:
    """Replay a recorded trace through the stacked-error recursion.

    Requires a trace logged with shared channel noise; with independent
    x/y noise the recursion premise is violated and the residual is
    expected to be materially nonzero.
    """
    if len(trace.v) < 2:
        raise ValueError("trace must contain at least two logged steps")
    n, d = trace.x[0].shape
    prop = error_propagator(W, d, trace.gamma)
    alpha, gamma = trace.alpha, trace.gamma
    K = len(trace.v)

    psis = [stack_errors(trace.v[k], trace.x[k], trace.y[k], alpha) for k in range(K)]
    residuals = np.zeros(K - 1)
    for k in range(1, K):
        eps_k = trace.eps_x[k].ravel()
        eps_km1 = trace.eps_x[k - 1].ravel()
        grad_diff = (trace.grads[k] - trace.grads[k - 1]).ravel()
        E = (gamma / alpha) * np.concatenate([
            prop.Qt @ eps_k,
            prop.Qt @ eps_km1,
            alpha * (prop.Qt @ eps_km1),
        ])
        E += np.concatenate([np.zeros(n * d), np.zeros(n * d), prop.proj @ grad_diff])
        predicted = prop.full @ psis[k - 1] + alpha * E
        residuals[k - 1] = np.linalg.norm(psis[k] - predicted)
    max_psi = max(float(np.linalg.norm(p)) for p in psis)
    return ResidualReport(residuals=residuals,
                          max_residual=float(residuals.max()),
                          max_psi_norm=max_psi)


@dataclass(frozen=True)
class RecursionCheck:
    a: np.ndarray
    bound: np.ndarray
    passed: bool


def windowed_recursion_check(rho_prime: float, rho_dprime: float, b: float, c: float,
                             r: float, tau: int, e: np.ndarray, T: int,
                             a0: float = 1.0) -> RecursionCheck:
    """Drive the two-branch windowed scalar recursion at equality and test it
    against the closed-form envelope.

    Worst-case sequence (equality is the strongest checkable instance):

        a_t = rho'  a_{t-tau} + (b/tau) sum_{i=t-tau}^{t-1} a_i + c sum e_i + r   (t >= tau)
        a_t = rho'' a_0       + (b/tau) sum_{i=0}^{t-1}     a_i + c sum e_i + r   (t < tau)

    Envelope: a_t <= 20 rho'' q^t a_0 + 60 c sum_i q^(t-i) e_i + 26 r / rho,
    q = 1 - 3 rho / (4 tau), rho = 1 - 2 rho'.
    """
    if not (0.0 < rho_prime <= 0.25):
        raise ValueError("rho_prime must lie in (0, 1/4]")
    if b > rho_prime / 4.0 + 1e-15:
        raise ValueError("need b <= rho_prime / 4")
    if min(b, c, r, rho_dprime, a0) < 0:
        raise ValueError("constants must be nonnegative")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    e = np.asarray(e, dtype=np.float64)
    if len(e) < T:
        raise ValueError("need at least T entries of e")

    a = np.zeros(T + 1)
    a[0] = a0
    for t in range(1, T + 1):
        if t >= tau:
            a[t] = rho_prime * a[t - tau] + (b / tau) * a[t - tau:t].sum() \
                + c * e[t - tau:t].sum() + r
        else:
            a[t] = rho_dprime * a0 + (b / tau) * a[:t].sum() + c * e[:t].sum() + r

    rho = 1.0 - 2.0 * rho_prime
    q = 1.0 - 3.0 * rho / (4.0 * tau)
    bound = np.zeros(T + 1)
    weights = q ** np.arange(T + 1)
    for t in range(T + 1):
        conv = float(np.dot(weights[1:t + 1][::-1], e[:t])) if t > 0 else 0.0
        bound[t] = 20.0 * rho_dprime * weights[t] * a0 + 60.0 * c * conv + 26.0 * r / rho
    passed = bool(np.all(a <= bound + 1e-12))
    return RecursionCheck(a=a, bound=bound, passed=passed)


@dataclass(frozen=True)
class AveragingMC:
    empirical: np.ndarray   # trial-averaged ||x_k - xbar_k||^2, k = 0..K
    bound: np.ndarray
    sem: np.ndarray
    passed: bool


def averaging_noise_mc(W: np.ndarray, d: int, gamma: float, sigma_c: float,
                       x0: np.ndarray, K: int, trials: int, seed: int = 0) -> AveragingMC:
    """Monte-Carlo check of the pure-averaging noise floor.

    Simulates x_k = (I - gamma Q') x_{k-1} + gamma Qhat eps_{k-1} with
    zero-mean Gaussian noise of per-node vector variance sigma_c^2 and tests
    the trial-averaged consensus error against

        (1 - gamma (1 - lambda_2))^(2k) ||x_0 - xbar_0||^2
            + 2 n gamma sigma_c^2 / (1 - lambda_2)

    at every k, with 3-sigma Monte-Carlo slack.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    if not (0.0 < gamma <= 0.25):
        raise ValueError("gamma must lie in (0, 1/4]")
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    lam2 = spectrum(W).lambda2
    x0 = np.asarray(x0, dtype=np.float64).reshape(n, d)

    Mg = (1.0 - gamma) * np.eye(n) + gamma * W
    Qh = W - np.diag(np.diag(W))
    rng = substream(seed, "averaging-mc")

    X = np.broadcast_to(x0, (trials, n, d)).copy()
    per_coord_std = sigma_c / np.sqrt(d)

    def consensus_sq(Xb):
        dev = Xb - Xb.mean(axis=1, keepdims=True)
        return np.einsum("tnd,tnd->t", dev, dev)

    emp = np.zeros(K + 1)
    sem = np.zeros(K + 1)
    cs = consensus_sq(X)
    emp[0], sem[0] = cs.mean(), cs.std(ddof=1) / np.sqrt(trials)
    for k in range(1, K + 1):
        X = np.matmul(Mg, X)
        if sigma_c > 0:
            eps = rng.standard_normal((trials, n, d)) * per_coord_std
            X += gamma * np.matmul(Qh, eps)
        cs = consensus_sq(X)
        emp[k], sem[k] = cs.mean(), cs.std(ddof=1) / np.sqrt(trials)

    rate = 1.0 - gamma * (1.0 - lam2)
    init = float(np.sum((x0 - x0.mean(axis=0, keepdims=True)) ** 2))
    ks = np.arange(K + 1)
    bound = rate ** (2 * ks) * init + 2.0 * n * gamma * sigma_c**2 / (1.0 - lam2)
    # relative cushion absorbs float rounding in the deterministic case,
    # where the recursion attains the bound with equality and sem is zero
    passed = bool(np.all(emp <= bound * (1.0 + 1e-9) + 3.0 * sem + 1e-15))
    return AveragingMC(empirical=emp, bound=bound, sem=sem, passed=passed)
