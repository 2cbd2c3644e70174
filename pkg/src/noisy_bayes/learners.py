"""Linear-logit learners for binary noisy labels.

Four training rules share one full-batch gradient-descent loop on the logistic
loss ``l(a, y) = -a y + log(1 + e^a)``:

* ``Oracle``       unweighted, clean labels
* ``Naive``        unweighted, noisy labels
* ``WeightedERM``  sample ``i`` weighted by ``p_n(1 - y'_i)``, noisy labels
* ``PeerLoss``     exact (all-pairs) peer risk, noisy labels

With the logistic loss the exact peer risk is linear in the weights, so peer
training only succeeds when the linear term vanishes; otherwise it raises
``Diverges``.
"""
from dataclasses import dataclass, asdict
import enum
import itertools
from typing import Optional

import numpy as np

from .errors import Diverges, EmptyDataset, NonFinite, TooFewSamples
from .rng import make_rng

DIVERGENCE_TOL = 1e-12
BLOWUP = 1e6


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise NonFinite("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros(dim), 0.0)

    @property
    def dim(self):
        return self.weights.size

    def logit(self, X):
        return np.asarray(X, dtype=float) @ self.weights + self.bias

    def predict(self, X):
        return (self.logit(X) >= 0).astype(np.int64)

    def flipped(self):
        return LinearModel(-self.weights, -self.bias)

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], dtype=float), d["bias"])


class LossKind(enum.Enum):
    ZERO_ONE = "ZeroOne"
    LOGISTIC = "Logistic"


class Rule(enum.Enum):
    ORACLE = "Oracle"
    NAIVE = "Naive"
    WEIGHTED_ERM = "WeightedERM"
    PEER_LOSS = "PeerLoss"


def pointwise_loss(loss, logits, labels):
    """``l(f(x), y)`` elementwise. ``loss`` is a LossKind or a callable."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if callable(loss) and not isinstance(loss, LossKind):
        return np.asarray(loss(logits, labels), dtype=float)
    if loss is LossKind.LOGISTIC:
        return np.logaddexp(0.0, logits) - logits * labels
    if loss is LossKind.ZERO_ONE:
        return ((logits >= 0).astype(float) != labels).astype(float)
    raise ValueError(f"unknown loss {loss!r}")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_iters: int = 5000
    grad_tol: float = 1e-7
    seed: int = 0
    l2: float = 0.0
    peer_sampled: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass(frozen=True)
class ConvergenceReport:
    rule: str
    iterations: int
    converged: bool
    grad_norm: float
    risk: float
    seed: int
    l2: float
    peer_sampled: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TrainResult:
    model: LinearModel
    report: ConvergenceReport

    def to_dict(self):
        out = self.model.to_dict()
        out.update(self.report.to_dict())
        return out


def _labels(data):
    y = np.asarray(data.noisy_labels)
    if y.size == 0:
        raise EmptyDataset("dataset has no samples")
    return y


def empirical_class_weights(noisy_labels):
    """``(p_n(0), p_n(1))``: empirical noisy-label proportions."""
    y = np.asarray(noisy_labels)
    if y.size == 0:
        raise EmptyDataset("no labels")
    p1 = np.count_nonzero(y == 1) / y.size
    return 1.0 - p1, p1


def balancing_weights(noisy_labels):
    """Per-sample weight ``p_n(1 - y'_i)``."""
    p0, p1 = empirical_class_weights(noisy_labels)
    return np.where(np.asarray(noisy_labels) == 1, p0, p1)


def weighted_erm_risk(model, data, loss=LossKind.LOGISTIC):
    """``(1/n) sum_i p_n(1 - y'_i) l(f(x_i), y'_i)``."""
    y = _labels(data)
    losses = pointwise_loss(loss, model.logit(data.features), y)
    return float(np.mean(balancing_weights(y) * losses))


def weighted_logistic_gradient(model, features, labels, sample_weights, l2=0.0):
    """Risk and gradient of ``(1/n) sum w_i l(f(x_i), y_i) + (l2/2) |beta|^2``.

    Returns ``(risk, grad_weights, grad_bias)``; the bias is not regularized.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    w = np.asarray(sample_weights, dtype=float)
    z = X @ model.weights + model.bias
    n = y.size
    risk = float(np.sum(w * (np.logaddexp(0.0, z) - y * z)) / n + 0.5 * l2 * model.weights @ model.weights)
    r = w * (_sigmoid(z) - y) / n
    return risk, X.T @ r + l2 * model.weights, float(r.sum())


def _gradient_descent(features, labels, sample_weights, config, rule):
    X = np.asarray(features, dtype=float)
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    y = np.asarray(labels, dtype=float)
    w = np.asarray(sample_weights, dtype=float)
    theta = np.zeros(d + 1)
    reg = np.full(d + 1, config.l2)
    reg[-1] = 0.0
    lr, tol = config.learning_rate, config.grad_tol
    converged = False
    grad_norm = np.inf
    it = 0
    for it in range(1, config.max_iters + 1):
        z = Xa @ theta
        grad = Xa.T @ (w * (_sigmoid(z) - y)) / n + reg * theta
        grad_norm = float(np.max(np.abs(grad)))
        if not np.isfinite(grad_norm):
            raise NonFinite(f"{rule.value}: gradient overflow at iteration {it}")
        if grad_norm < tol:
            converged = True
            break
        theta -= lr * grad
    if not np.all(np.isfinite(theta)):
        raise NonFinite(f"{rule.value}: parameters overflowed")
    model = LinearModel(theta[:-1], theta[-1])
    risk, _, _ = weighted_logistic_gradient(model, X, y, w, config.l2)
    return model, ConvergenceReport(rule.value, it, converged, grad_norm, risk, config.seed, config.l2)


def train(rule, data, config=None, loss=LossKind.LOGISTIC):
    """Fit a LinearModel by full-batch gradient descent from zero.

    Non-oracle rules only ever see ``data.observed()`` when the dataset offers
    it, so clean labels cannot leak into them.
    """
    rule = Rule(rule)
    config = config or TrainConfig()
    if loss is not LossKind.LOGISTIC:
        raise ValueError("training uses the logistic loss; 0-1 loss is for evaluation")

    if rule is Rule.ORACLE:
        clean = getattr(data, "clean_labels", None)
        if clean is None:
            raise ValueError("the Oracle rule needs clean labels")
        if len(clean) == 0:
            raise EmptyDataset("dataset has no samples")
        return TrainResult(*_gradient_descent(data.features, clean, np.ones(len(clean)), config, rule))

    if hasattr(data, "observed"):
        data = data.observed()
    y = _labels(data)
    if rule is Rule.NAIVE:
        return TrainResult(*_gradient_descent(data.features, y, np.ones(y.size), config, rule))
    if rule is Rule.WEIGHTED_ERM:
        return TrainResult(*_gradient_descent(data.features, y, balancing_weights(y), config, rule))
    if config.peer_sampled:
        return _train_peer_sampled(data, config)
    return _train_peer_exact(data, config)


def _peer_terms(model, data, loss):
    y = _labels(data)
    if y.size < 2:
        raise TooFewSamples("peer loss needs at least two samples")
    return y, model.logit(data.features)


def peer_risk_raw(model, data, loss=LossKind.LOGISTIC):
    """All-pairs peer risk: mean own loss minus mean loss over mismatched pairs."""
    y, f = _peer_terms(model, data, loss)
    n = y.size
    pair = pointwise_loss(loss, f[:, None], y[None, :])  # [j, k] = l(f(x_j), y'_k)
    mismatched = pair.sum() - np.trace(pair)
    return float(np.trace(pair) / n - mismatched / (n * (n - 1)))


def peer_risk_simplified(model, data, loss=LossKind.LOGISTIC):
    """``(1/(n-1)) sum_i p_n(1 - y'_i) {l(f_i, y'_i) - l(f_i, 1 - y'_i)}``."""
    y, f = _peer_terms(model, data, loss)
    diff = pointwise_loss(loss, f, y) - pointwise_loss(loss, f, 1 - y)
    return float(np.sum(balancing_weights(y) * diff) / (y.size - 1))


def peer_pairs(n, seed):
    """For each sample, an independent uniform ordered pair ``j != k``."""
    rng = make_rng(seed, "peer-pairs")
    j = rng.integers(0, n, size=n)
    k = rng.integers(0, n - 1, size=n)
    k = k + (k >= j)
    return j, k


def peer_risk_sampled(model, data, loss=LossKind.LOGISTIC, seed=0):
    """One-draw peer estimator: ``l(f_i, y'_i) - l(f_j, y'_k)`` averaged over i."""
    y, f = _peer_terms(model, data, loss)
    j, k = peer_pairs(y.size, seed)
    return float(np.mean(pointwise_loss(loss, f, y) - pointwise_loss(loss, f[j], y[k])))


def peer_divergence_direction(data) -> Optional[np.ndarray]:
    """Weight direction along which the logistic peer risk falls without bound.

    ``v = (1/(n-1)) sum_i p_n(1 - y'_i) (2 y'_i - 1) x_i``; the logistic peer risk
    equals ``-v . beta`` (the bias term cancels), so it is unbounded below unless
    ``v = 0``. Returns None when ``|v|_inf < 1e-12``.
    """
    y = _labels(data)
    if y.size < 2:
        raise TooFewSamples("peer loss needs at least two samples")
    X = np.asarray(data.features, dtype=float)
    v = (balancing_weights(y) * (2 * y - 1)) @ X / (y.size - 1)
    if np.max(np.abs(v)) < DIVERGENCE_TOL:
        return None
    return v


def _train_peer_exact(data, config):
    v = peer_divergence_direction(data)
    if v is not None:
        raise Diverges(f"logistic peer risk is -v.beta with |v|_inf = {np.max(np.abs(v)):.3e}; "
                       "unbounded below", direction=v)
    # risk is identically zero: the starting point is already optimal
    model = LinearModel.zeros(np.asarray(data.features).shape[1])
    report = ConvergenceReport(Rule.PEER_LOSS.value, 0, True, 0.0, 0.0, config.seed, config.l2)
    return TrainResult(model, report)


def _train_peer_sampled(data, config):
    X = np.asarray(data.features, dtype=float)
    y = np.asarray(data.noisy_labels, dtype=float)
    n, d = X.shape
    if n < 2:
        raise TooFewSamples("peer loss needs at least two samples")
    Xa = np.hstack([X, np.ones((n, 1))])
    j, k = peer_pairs(n, config.seed)
    theta = np.zeros(d + 1)
    reg = np.full(d + 1, config.l2)
    reg[-1] = 0.0
    converged = False
    grad_norm = np.inf
    it = 0
    for it in range(1, config.max_iters + 1):
        z = Xa @ theta
        s = _sigmoid(z)
        grad = (Xa.T @ (s - y) - Xa[j].T @ (s[j] - y[k])) / n + reg * theta
        grad_norm = float(np.max(np.abs(grad)))
        if not np.isfinite(grad_norm):
            raise NonFinite(f"PeerLoss: gradient overflow at iteration {it}")
        if grad_norm < config.grad_tol:
            converged = True
            break
        theta -= config.learning_rate * grad
        if np.max(np.abs(theta)) > BLOWUP:
            raise Diverges(f"sampled peer risk: |beta| exceeded {BLOWUP:g} at iteration {it}",
                           direction=theta[:-1].copy())
    model = LinearModel(theta[:-1], theta[-1])
    risk = peer_risk_sampled(model, data, LossKind.LOGISTIC, config.seed) \
        + 0.5 * config.l2 * float(model.weights @ model.weights)
    report = ConvergenceReport(Rule.PEER_LOSS.value, it, converged, grad_norm, risk,
                               config.seed, config.l2, peer_sampled=True)
    return TrainResult(model, report)


def evaluate(model, features, labels):
    """Fraction of ``1{f(x) >= 0} == y``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyDataset("nothing to evaluate")
    if np.asarray(features).shape[0] != labels.size:
        raise ValueError("features and labels differ in length")
    return float(np.mean(model.predict(features) == labels))


# population-level oracles on a finite feature space

def weighted_population_risk(joint, labeling):
    """``E[p'(1 - Y') 1{f(X) != Y'}]`` for a binary DiscreteJoint and labels f(x)."""
    q = joint.x_noisy  # [x, y']
    p_noisy = joint.p_noisy
    f = np.asarray(labeling)
    cost_if_0 = q[:, 1] * p_noisy[0]  # predicting 0 errs on y' = 1
    cost_if_1 = q[:, 0] * p_noisy[1]
    return float(np.sum(np.where(f == 1, cost_if_1, cost_if_0)))


def minimize_weighted_risk_exhaustive(joint, rtol=1e-12):
    """Minimize the weighted 0-1 risk over all ``2^|X|`` labelings.

    Among labelings within ``rtol`` of the minimum the one with the most 1s wins,
    i.e. ties go to class 1.
    """
    if joint.K != 2:
        raise ValueError("binary joints only")
    m = joint.n_x
    labelings = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int64)
    q = joint.x_noisy
    p_noisy = joint.p_noisy
    cost_if_0 = q[:, 1] * p_noisy[0]
    cost_if_1 = q[:, 0] * p_noisy[1]
    risks = labelings @ cost_if_1 + (1 - labelings) @ cost_if_0
    best = risks.min()
    near = np.flatnonzero(risks <= best + rtol * max(abs(best), 1e-300))
    ones = labelings[near].sum(axis=1)
    return labelings[near[np.argmax(ones)]]


def bayes_labeling(joint, rtol=1e-12):
    """Clean Bayes rule on the support: class 1 iff ``q(x, 1) >= q(x, 0)``.

    Differences within ``rtol`` of the larger mass count as ties (class 1).
    """
    xy = joint.xy
    slack = rtol * np.maximum(xy[:, 0], xy[:, 1])
    return (xy[:, 1] >= xy[:, 0] - slack).astype(np.int64)
