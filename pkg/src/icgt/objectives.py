"""Per-node objective functions and stochastic gradient oracles.

Two objective families, both L-smooth and mu-strongly convex:

* quadratic: f_i(x) = 0.5 x'A_i x - b_i'x with A_i symmetric positive
  definite (standard strongly convex test function);
* logistic: mean binary cross-entropy over node i's data shard with sigmoid
  link plus an l2 ridge term (lambda/2)||x||^2.

Gradient oracles return conditionally unbiased samples of the local
gradients: exact, minibatch (uniform without replacement), or the exact
gradient plus isotropic Gaussian noise calibrated so E||noise||^2 = sigma_g^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .rng import substream

ORACLE_MODES = ("exact", "minibatch", "additive_gaussian")


@dataclass(frozen=True)
class SmoothnessInfo:
    L: float
    mu: float

    @property
    def condition(self) -> float:
        return self.L / self.mu


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    grad_norm: float


class QuadraticObjective:
    """f_i(x) = 0.5 x'A_i x - b_i'x for SPD A_i."""

    kind = "quadratic"

    def __init__(self, A: np.ndarray, b: np.ndarray):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ValueError("expected A with shape (n, d, d) and b with shape (n, d)")
        if np.abs(A - A.transpose(0, 2, 1)).max() > 1e-12:
            raise ValueError("each A_i must be symmetric")
        self.A = A
        self.b = b
        self.n, self.d = b.shape

    def local_value_grad(self, i: int, x: np.ndarray):
        Ax = self.A[i] @ x
        return 0.5 * x @ Ax - self.b[i] @ x, Ax - self.b[i]

    def local_grad_block(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("nij,nj->ni", self.A, X) - self.b

    def grads_at(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b

    def global_value_grad(self, x: np.ndarray):
        vals = [self.local_value_grad(i, x) for i in range(self.n)]
        value = float(np.mean([v for v, _ in vals]))
        grad = np.mean([g for _, g in vals], axis=0)
        return value, grad


def _log_sigmoid_terms(t: np.ndarray):
    # -log sigmoid(t) and -log(1 - sigmoid(t)), computed stably
    return np.logaddexp(0.0, -t), np.logaddexp(0.0, t)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class LogisticObjective:
    """Ridge-regularized binary logistic regression on disjoint shards."""

    kind = "logistic"

    def __init__(self, shards, reg_lambda: float):
        if reg_lambda <= 0:
            raise ValueError("reg_lambda must be positive for strong convexity")
        if not shards:
            raise ValueError("need at least one shard")
        self.shards = []
        d = None
        for Y, z in shards:
            Y = np.asarray(Y, dtype=np.float64)
            z = np.asarray(z, dtype=np.float64)
            if Y.ndim != 2 or len(z) != Y.shape[0]:
                raise ValueError("each shard must be (features (m, d), labels (m,))")
            if Y.shape[0] == 0:
                raise ValueError("empty shard")
            if d is None:
                d = Y.shape[1]
            elif Y.shape[1] != d:
                raise ValueError("inconsistent feature dimension across shards")
            self.shards.append((Y, z))
        self.reg_lambda = float(reg_lambda)
        self.n = len(self.shards)
        self.d = int(d)

    def shard_sizes(self) -> list[int]:
        return [Y.shape[0] for Y, _ in self.shards]

    def local_value_grad(self, i: int, x: np.ndarray):
        Y, z = self.shards[i]
        t = Y @ x
        neg_log_s, neg_log_1ms = _log_sigmoid_terms(t)
        value = float(np.mean(z * neg_log_s + (1.0 - z) * neg_log_1ms))
        value += 0.5 * self.reg_lambda * float(x @ x)
        grad = Y.T @ (_sigmoid(t) - z) / len(z) + self.reg_lambda * x
        return value, grad

    def local_grad_block(self, X: np.ndarray) -> np.ndarray:
        return np.stack([self.local_value_grad(i, X[i])[1] for i in range(self.n)])

    def grads_at(self, x: np.ndarray) -> np.ndarray:
        return np.stack([self.local_value_grad(i, x)[1] for i in range(self.n)])

    def global_value_grad(self, x: np.ndarray):
        vals = [self.local_value_grad(i, x) for i in range(self.n)]
        value = float(np.mean([v for v, _ in vals]))
        grad = np.mean([g for _, g in vals], axis=0)
        return value, grad

    def global_hessian(self, x: np.ndarray) -> np.ndarray:
        H = self.reg_lambda * np.eye(self.d)
        for Y, _ in self.shards:
            s = _sigmoid(Y @ x)
            H += (Y.T * (s * (1.0 - s))) @ Y / (len(s) * self.n)
        return H

    def minibatch_grad(self, i: int, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        Y, z = self.shards[i]
        Yb, zb = Y[idx], z[idx]
        return Yb.T @ (_sigmoid(Yb @ x) - zb) / len(idx) + self.reg_lambda * x


Objective = QuadraticObjective | LogisticObjective


@dataclass
class GradientOracle:
    """Sampling mode for local gradients; draws are keyed by iteration."""

    mode: str = "exact"
    batch_size: int = 32
    sigma_g: float = 0.0
    seed: int = 0
    tag: str = "grad"
    clamp_warned: bool = False

    def __post_init__(self):
        if self.mode not in ORACLE_MODES:
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.sigma_g < 0:
            raise ValueError("sigma_g must be nonnegative")

    def stream(self, k: int) -> np.random.Generator:
        return substream(self.seed, self.tag, k)


def _batch_indices(oracle: GradientOracle, objective, k: int) -> list[np.ndarray]:
    """Per-node minibatch indices at iteration k (uniform, no replacement)."""
    if objective.kind != "logistic":
        raise ValueError("minibatch sampling requires a dataset-backed objective")
    rng = oracle.stream(k)
    sizes = objective.shard_sizes()
    out = []
    for i, m in enumerate(sizes):
        B = oracle.batch_size
        if B > m:
            if not oracle.clamp_warned:
                warnings.warn(
                    f"batch size {B} exceeds shard size {m}; clamping to full batch",
                    stacklevel=2,
                )
                oracle.clamp_warned = True
            B = m
        # B smallest of m iid uniforms = uniform B-subset
        out.append(np.argpartition(rng.random(m), B - 1)[:B] if B < m else np.arange(m))
    return out


def sample_gradient_block(oracle: GradientOracle, objective, X: np.ndarray, k: int) -> np.ndarray:
    """Sampled local gradients for all nodes, row i at the point X[i]."""
    if oracle.mode == "exact":
        return objective.local_grad_block(X)
    if oracle.mode == "additive_gaussian":
        g = objective.local_grad_block(X)
        if oracle.sigma_g == 0.0:
            return g
        noise = oracle.stream(k).standard_normal(X.shape)
        return g + noise * (oracle.sigma_g / np.sqrt(X.shape[1]))
    idx = _batch_indices(oracle, objective, k)
    return np.stack(
        [objective.minibatch_grad(i, X[i], idx[i]) for i in range(objective.n)]
    )


def sample_gradient(oracle: GradientOracle, objective, i: int, x: np.ndarray, k: int) -> np.ndarray:
    """Single-node view of the iteration-k sample (consistent with the block path)."""
    if oracle.mode == "exact":
        return objective.local_value_grad(i, x)[1]
    if oracle.mode == "additive_gaussian":
        g = objective.local_value_grad(i, x)[1]
        if oracle.sigma_g == 0.0:
            return g
        noise = oracle.stream(k).standard_normal((objective.n, objective.d))[i]
        return g + noise * (oracle.sigma_g / np.sqrt(objective.d))
    idx = _batch_indices(oracle, objective, k)[i]
    return objective.minibatch_grad(i, x, idx)


def local_value_grad(objective, i: int, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("local_value_grad requires finite input")
    if not (0 <= i < objective.n):
        raise IndexError(f"node index {i} out of range for n={objective.n}")
    return objective.local_value_grad(i, x)


def estimate_constants(objective) -> SmoothnessInfo:
    """Smoothness / strong-convexity constants.

    Quadratic: extreme eigenvalues over the A_i.  Logistic: the standard
    quarter-sigmoid curvature bound per shard plus the ridge term (an upper
    bound on L, hence conservative for step-size rules).
    """
    if objective.kind == "quadratic":
        eigs = np.linalg.eigvalsh(objective.A)
        return SmoothnessInfo(L=float(eigs.max()), mu=float(eigs.min()))
    L = 0.0
    for Y, _ in objective.shards:
        gram_top = float(np.linalg.eigvalsh(Y.T @ Y).max())
        L = max(L, gram_top / (4.0 * Y.shape[0]) + objective.reg_lambda)
    return SmoothnessInfo(L=L, mu=objective.reg_lambda)


def solve_reference(objective, tol: float = 1e-10, max_iter: int = 100_000) -> ReferenceSolution:
    """Deterministic minimizer of the global objective to ||grad|| <= tol.

    Quadratic objectives solve the normal equations directly; logistic ones
    run a quasi-second-order method polished with Newton steps.  Independent
    of all simulator random streams.
    """
    if objective.kind == "quadratic":
        x_star = np.linalg.solve(objective.A.mean(axis=0), objective.b.mean(axis=0))
        f_star, grad = objective.global_value_grad(x_star)
        return ReferenceSolution(x_star, f_star, float(np.linalg.norm(grad)))

    def fun(x):
        v, g = objective.global_value_grad(x)
        return v, g

    x = np.zeros(objective.d)
    res = minimize(fun, x, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 0.0})
    x = res.x
    for _ in range(100):
        _, g = objective.global_value_grad(x)
        if np.linalg.norm(g) <= tol:
            break
        H = objective.global_hessian(x)
        x = x - np.linalg.solve(H, g)
    f_star, grad = objective.global_value_grad(x)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm > tol:
        raise RuntimeError(f"reference solve stalled at ||grad||={grad_norm:.3e} > {tol:.1e}")
    return ReferenceSolution(x, f_star, grad_norm)


def heterogeneity_chi2(objective, x_star: np.ndarray) -> float:
    """chi^2 = (1/n) sum_i ||grad f_i(x*) - grad f(x*)||^2, the data
    heterogeneity measured at the optimum."""
    grads = objective.grads_at(np.asarray(x_star, dtype=np.float64))
    mean_grad = grads.mean(axis=0)
    return float(np.mean(np.sum((grads - mean_grad) ** 2, axis=1)))


def partition_dataset(features: np.ndarray, labels: np.ndarray, n: int, per_node: int, seed: int):
    """Disjoint uniformly-random shards of ``per_node`` samples each."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    m = features.shape[0]
    if per_node < 1:
        raise ValueError("per_node must be >= 1")
    if n * per_node > m:
        raise ValueError(f"cannot draw {n} x {per_node} disjoint samples from {m}")
    perm = substream(seed, "partition").permutation(m)
    return [
        (features[perm[i * per_node:(i + 1) * per_node]],
         np.asarray(labels[perm[i * per_node:(i + 1) * per_node]], dtype=np.float64))
        for i in range(n)
    ]


def random_quadratic(n: int, d: int, mu: float = 1.0, l_max: float = 10.0,
                     hetero: float = 1.0, seed: int = 0) -> QuadraticObjective:
    """Heterogeneous synthetic quadratics with spectra inside [mu, l_max].

    Every node gets eigenvalues spanning the full range (so the reported
    constants match the targets) and a linear term of scale ``hetero``
    controlling how far apart the local minimizers sit.
    """
    if not (0 < mu <= l_max):
        raise ValueError("need 0 < mu <= l_max")
    rng = substream(seed, "quadratic")
    A = np.empty((n, d, d))
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        if d == 1:
            eigs = np.full(1, mu if i % 2 else l_max)
        else:
            interior = rng.uniform(mu, l_max, size=d - 2) if d > 2 else np.empty(0)
            eigs = np.concatenate(([mu, l_max], interior))
        A[i] = (Q * eigs) @ Q.T
        A[i] = 0.5 * (A[i] + A[i].T)
    b = hetero * rng.standard_normal((n, d))
    return QuadraticObjective(A, b)
