"""Synthetic local objectives with exact and minibatch gradient oracles.

Three problem families: least-squares regression on uniform features,
a non-convex multi-class sigmoid loss on heterogeneous Gaussian features,
and a tiny quadratic with a closed-form minimizer for exact-convergence
oracles.  Datasets are a pure function of (sizes, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

LINREG = "linreg"
SIGMOID = "sigmoid"
TINY_QUADRATIC = "tiny_quadratic"

FULL = "full"

# sup_y |sigmoid''(y)|, attained at sigmoid(y) = (3 +/- sqrt(3))/6
_SIGMOID_CURV = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class GradSample:
    """One gradient oracle evaluation: full-batch if batch is None."""

    agent: int
    batch: np.ndarray | None
    value: np.ndarray


class Problem:
    """Base for n-agent problems with model dimension d."""

    kind: str
    n: int
    d: int
    reg: float

    def samples(self, agent: int) -> int:
        raise NotImplementedError

    def local_loss(self, agent: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def local_grad_full(self, agent: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local_grad_batch(self, agent: int, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grads_at(self, X: np.ndarray) -> np.ndarray:
        """Exact local gradients, row i evaluated at X[i]; shape (n, d)."""
        return np.stack([self.local_grad_full(i, X[i]) for i in range(self.n)])

    def stochastic_grads(self, X: np.ndarray, batch: int | str,
                         rng: np.random.Generator) -> np.ndarray:
        """Minibatch gradients for all agents, row i at X[i]."""
        if batch == FULL:
            return self.grads_at(X)
        return np.stack([
            self.local_grad_batch(i, X[i], _draw_batch(self, i, batch, rng))
            for i in range(self.n)
        ])


def _draw_batch(problem: Problem, agent: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    m = problem.samples(agent)
    if batch > m:
        raise InvalidInputError(f"batch {batch} exceeds agent {agent}'s {m} samples")
    return rng.choice(m, size=batch, replace=False)


# ---------------------------------------------------------------------------
# least-squares regression

@dataclass
class LinearRegressionProblem(Problem):
    """f_i(x) = (1/m) sum_j (<x, z_ij> - y_ij)^2."""

    features: np.ndarray  # (n, m, d)
    labels: np.ndarray    # (n, m)
    x_true: np.ndarray    # (d,)
    reg: float = 0.0
    kind: str = field(default=LINREG, init=False)

    def __post_init__(self):
        self.n, self._m, self.d = self.features.shape
        self._x_ls = None

    def samples(self, agent):
        return self._m

    def local_loss(self, agent, x):
        r = self.features[agent] @ x - self.labels[agent]
        return float(r @ r) / self._m

    def local_grad_full(self, agent, x):
        r = self.features[agent] @ x - self.labels[agent]
        return (2.0 / self._m) * (self.features[agent].T @ r)

    def local_grad_batch(self, agent, x, idx):
        Z = self.features[agent, idx]
        r = Z @ x - self.labels[agent, idx]
        return (2.0 / idx.size) * (Z.T @ r)

    def grads_at(self, X):
        r = np.einsum("nmd,nd->nm", self.features, X) - self.labels
        return (2.0 / self._m) * np.einsum("nm,nmd->nd", r, self.features)

    def least_squares(self) -> np.ndarray:
        """Global minimizer from the normal equations (all agents weighted equally)."""
        if self._x_ls is None:
            Z = self.features.reshape(-1, self.d)
            y = self.labels.reshape(-1)
            self._x_ls = np.linalg.solve(Z.T @ Z, Z.T @ y)
        return self._x_ls


def make_linreg(n: int = 10, m_per_agent: int = 30, d: int = 100,
                seed: int = 0) -> LinearRegressionProblem:
    """Uniform features z ~ U(0,1)^d, labels <x_true, z> + U(0, 0.1) noise."""
    rng = np.random.default_rng(seed)
    x_true = rng.uniform(-1.0, 1.0, d)
    Z = rng.uniform(0.0, 1.0, (n, m_per_agent, d))
    eps = rng.uniform(0.0, 0.1, (n, m_per_agent))
    y = Z @ x_true + eps
    return LinearRegressionProblem(features=Z, labels=y, x_true=x_true)


# ---------------------------------------------------------------------------
# multi-class sigmoid loss

@dataclass
class SigmoidProblem(Problem):
    """Per class k: (1/m) sum_j sigmoid(b_jk <x_k, z_j>) + (reg/2)||x_k||^2,
    with b_jk = +1 when sample j carries label k and -1 otherwise.

    The model stacks the K class vectors, d = K * feat_d.  The sign sits
    inside the sigmoid exactly as the generating description states.
    """

    features: np.ndarray  # (n, m, f)
    labels: np.ndarray    # (n, m) ints in [0, K)
    x_true: np.ndarray    # (K, f)
    classes: int
    reg: float = 1e-4
    kind: str = field(default=SIGMOID, init=False)

    def __post_init__(self):
        self.n, self._m, self._f = self.features.shape
        self.d = self.classes * self._f
        # +/-1 indicator, precomputed once: (n, m, K)
        onehot = self.labels[..., None] == np.arange(self.classes)
        self._b = np.where(onehot, 1.0, -1.0)

    def samples(self, agent):
        return self._m

    def _split(self, x):
        return np.asarray(x).reshape(self.classes, self._f)

    def local_loss(self, agent, x):
        xr = self._split(x)
        u = self.features[agent] @ xr.T          # (m, K)
        s = _sigmoid(self._b[agent] * u)
        return float(s.mean(axis=0).sum() + 0.5 * self.reg * np.sum(xr * xr))

    def local_grad_full(self, agent, x):
        return self.local_grad_batch(agent, x, np.arange(self._m))

    def local_grad_batch(self, agent, x, idx):
        xr = self._split(x)
        Z = self.features[agent, idx]            # (b, f)
        b = self._b[agent, idx]                  # (b, K)
        s = _sigmoid(b * (Z @ xr.T))
        w = s * (1.0 - s) * b                    # (b, K)
        g = (Z.T @ w).T / idx.size + self.reg * xr
        return g.reshape(-1)

    def grads_at(self, X):
        Xr = X.reshape(self.n, self.classes, self._f)
        u = np.matmul(self.features, Xr.transpose(0, 2, 1))   # (n, m, K)
        s = _sigmoid(self._b * u)
        w = s * (1.0 - s) * self._b
        g = np.matmul(self.features.transpose(0, 2, 1), w) / self._m  # (n, f, K)
        g = g.transpose(0, 2, 1) + self.reg * Xr
        return g.reshape(self.n, self.d)

    def agent_feature_mean(self, agent: int) -> np.ndarray:
        return self.features[agent].mean(axis=0)


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def make_sigmoid(n: int = 10, m_per_agent: int = 100, feat_d: int = 100,
                 classes: int = 10, seed: int = 0, reg: float = 1e-4) -> SigmoidProblem:
    """Heterogeneous Gaussian features: agent i draws its mean vector from
    U((-n/2+i-1)/(n/2), (-n/2+i)/(n/2))^f (i = 1..n) and samples
    z ~ N(mean_i, 0.5 I); labels are argmax_k <z, x_true_k>."""
    rng = np.random.default_rng(seed)
    x_true = rng.uniform(-1.0, 1.0, (classes, feat_d))
    half = n / 2.0
    Z = np.empty((n, m_per_agent, feat_d))
    for i in range(1, n + 1):
        mean = rng.uniform((-half + i - 1) / half, (-half + i) / half, feat_d)
        Z[i - 1] = mean + math.sqrt(0.5) * rng.standard_normal((m_per_agent, feat_d))
    labels = np.argmax(Z @ x_true.T, axis=2)
    return SigmoidProblem(features=Z, labels=labels, x_true=x_true, classes=classes, reg=reg)


# ---------------------------------------------------------------------------
# tiny quadratic oracle problem

@dataclass
class QuadraticProblem(Problem):
    """f_i(x) = (1/2) (x - c_i)^T P_i (x - c_i), P_i symmetric positive definite."""

    P: np.ndarray  # (n, d, d)
    c: np.ndarray  # (n, d)
    reg: float = 0.0
    kind: str = field(default=TINY_QUADRATIC, init=False)

    def __post_init__(self):
        self.n, self.d = self.c.shape
        self._x_star = None

    def samples(self, agent):
        return 1

    def local_loss(self, agent, x):
        r = x - self.c[agent]
        return 0.5 * float(r @ (self.P[agent] @ r))

    def local_grad_full(self, agent, x):
        return self.P[agent] @ (x - self.c[agent])

    def local_grad_batch(self, agent, x, idx):
        # deterministic oracle: the zero-variance case of the noise assumption
        return self.local_grad_full(agent, x)

    def grads_at(self, X):
        return np.einsum("nij,nj->ni", self.P, X - self.c)

    def stochastic_grads(self, X, batch, rng):
        return self.grads_at(X)

    def minimizer(self) -> np.ndarray:
        """Closed form: (sum P_i)^-1 sum P_i c_i."""
        if self._x_star is None:
            self._x_star = np.linalg.solve(
                self.P.sum(axis=0), np.einsum("nij,nj->i", self.P, self.c))
        return self._x_star


def make_tiny_quadratic(n: int = 3, d: int = 2, seed: int = 0) -> QuadraticProblem:
    rng = np.random.default_rng(seed)
    P = np.empty((n, d, d))
    for i in range(n):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        eigs = rng.uniform(0.5, 2.0, d)
        P[i] = (q * eigs) @ q.T
    c = rng.uniform(-1.0, 1.0, (n, d))
    return QuadraticProblem(P=P, c=c)


# ---------------------------------------------------------------------------
# module-level oracles

def local_grad(problem: Problem, agent: int, x: np.ndarray,
               batch: int | str = FULL,
               rng: np.random.Generator | None = None) -> GradSample:
    """Gradient oracle: full-batch is exact and deterministic; minibatches
    are sampled uniformly without replacement and are unbiased."""
    if not (0 <= agent < problem.n):
        raise InvalidInputError(f"agent {agent} outside [0, {problem.n})")
    if batch == FULL:
        return GradSample(agent=agent, batch=None,
                          value=problem.local_grad_full(agent, x))
    if rng is None:
        raise InvalidInputError("minibatch sampling needs an rng")
    idx = _draw_batch(problem, agent, batch, rng)
    return GradSample(agent=agent, batch=idx,
                      value=problem.local_grad_batch(agent, x, idx))


def global_grad(problem: Problem, x_bar: np.ndarray) -> np.ndarray:
    """(1/n) sum_i grad f_i(x_bar), exact."""
    X = np.broadcast_to(x_bar, (problem.n, problem.d))
    return problem.grads_at(np.ascontiguousarray(X)).mean(axis=0)


def global_grad_norm_sq(problem: Problem, x_bar: np.ndarray) -> float:
    g = global_grad(problem, x_bar)
    return float(g @ g)


def global_loss(problem: Problem, x_bar: np.ndarray) -> float:
    return sum(problem.local_loss(i, x_bar) for i in range(problem.n)) / problem.n


def finite_diff_check(problem: Problem, agent: int, x: np.ndarray, h: float) -> float:
    """Max relative error of the analytic gradient against central differences."""
    x = np.asarray(x, dtype=float)
    g = problem.local_grad_full(agent, x)
    fd = np.empty_like(g)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (problem.local_loss(agent, x + e) - problem.local_loss(agent, x - e)) / (2 * h)
    scale = max(1.0, float(np.max(np.abs(g))))
    return float(np.max(np.abs(fd - g))) / scale


def smoothness_constant(problem: Problem) -> float:
    """Gradient Lipschitz constant: exact for the quadratic families, an
    analytic upper bound sup|sigmoid''| * lam_max(Gram)/m + reg for the
    sigmoid loss (its Hessian vanishes at x = 0, so a curvature bound over
    all x is used instead of a point estimate)."""
    if problem.kind == TINY_QUADRATIC:
        return max(float(np.linalg.eigvalsh(problem.P[i])[-1]) for i in range(problem.n))
    if problem.kind == LINREG:
        return max(
            float(np.linalg.eigvalsh(
                (2.0 / problem.samples(i)) * problem.features[i].T @ problem.features[i])[-1])
            for i in range(problem.n))
    if problem.kind == SIGMOID:
        worst = 0.0
        for i in range(problem.n):
            gram = problem.features[i].T @ problem.features[i] / problem.samples(i)
            worst = max(worst, float(np.linalg.eigvalsh(gram)[-1]))
        return _SIGMOID_CURV * worst + problem.reg
    raise InvalidInputError(f"unknown problem kind {problem.kind!r}")
