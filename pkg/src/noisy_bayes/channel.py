"""Noise channels: corruption, inversion, construction and counterexamples.

Binary rate names
-----------------
For ``K = 2`` a channel is described by two flip rates::

    e0 = P(Y' = 1 | Y = 0) = E[1, 0]
    e1 = P(Y' = 0 | Y = 1) = E[0, 1]

The posterior inversion and marginal-substitution helpers use the
off-diagonal entries directly: ``e01 = E[0, 1]`` and ``e10 = E[1, 0]``.
"""
from dataclasses import dataclass, field
import itertools
from typing import Optional

import numpy as np

from .errors import (
    DegenerateChannel,
    InfeasibleRates,
    LabelOutOfRange,
    NoFlipFound,
    NonPositiveEntry,
)
from .rng import make_rng
from .simplex import (
    CLAMP_TOL,
    SINGULAR_TOL,
    PermutationMatrix,
    SimplexVector,
    StochasticMatrix,
    inverse,
    matrix_determinant,
    solve_linear,
    validate_simplex,
)

WITNESS_BUDGET = 100_000
GRID_RESOLUTION = 50
DEFAULT_DELTA = 0.5
CHECK_TOL = 1e-10


@dataclass(frozen=True)
class NoiseMatrix:
    """Column-stochastic channel with positive determinant."""

    entries: np.ndarray
    det: float = field(init=False)

    def __post_init__(self):
        stochastic = StochasticMatrix(self.entries)
        det = matrix_determinant(stochastic.entries)
        if not det > SINGULAR_TOL:
            raise DegenerateChannel(f"channel determinant {det:.3e} is not positive")
        object.__setattr__(self, "entries", stochastic.entries)
        object.__setattr__(self, "det", det)

    @classmethod
    def binary(cls, e0, e1):
        """Channel flipping class 0 with rate ``e0`` and class 1 with rate ``e1``."""
        for name, rate in (("e0", e0), ("e1", e1)):
            if not 0.0 <= rate <= 1.0:
                raise InfeasibleRates(f"{name} = {rate} is outside [0, 1]")
        if e0 + e1 >= 1.0:
            raise DegenerateChannel(f"e0 + e1 = {e0 + e1} >= 1")
        return cls(np.array([[1.0 - e0, e1], [e0, 1.0 - e1]]))

    @classmethod
    def identity(cls, k):
        return cls(np.eye(k))

    @property
    def K(self):
        return self.entries.shape[0]

    @property
    def e0(self):
        self._require_binary()
        return float(self.entries[1, 0])

    @property
    def e1(self):
        self._require_binary()
        return float(self.entries[0, 1])

    def _require_binary(self):
        if self.K != 2:
            raise AttributeError("named flip rates exist only for K = 2")

    def push_forward(self, p):
        return SimplexVector(self.entries @ np.asarray(p, dtype=float))

    def posterior(self, scores):
        """Solve ``E alpha = scores`` for the clean-class scores."""
        return solve_linear(self.entries, scores)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def to_list(self):
        return self.entries.tolist()


def corrupt_labels(labels, E, seed):
    """Draw ``Y'_i ~ E[:, Y_i]`` independently for every label."""
    E = E if isinstance(E, NoiseMatrix) else NoiseMatrix(E)
    labels = np.asarray(labels)
    if labels.size and (not np.issubdtype(labels.dtype, np.integer)):
        if not np.all(labels == np.round(labels)):
            raise LabelOutOfRange("labels must be integers")
        labels = labels.astype(np.int64)
    bad = np.flatnonzero((labels < 0) | (labels >= E.K))
    if bad.size:
        raise LabelOutOfRange(f"label {labels[bad[0]]} at index {int(bad[0])} not in 0..{E.K - 1}")
    u = make_rng(seed).random(labels.size)
    cdf = np.cumsum(E.entries, axis=0)[:, labels.astype(np.int64)]  # (K, n)
    noisy = (u[None, :] >= cdf[:-1]).sum(axis=0)
    return noisy.astype(np.int64)


def invert_binary_posterior(a, e01, e10):
    """Clean-class scores from noisy-class scores for a binary channel.

    ``a`` is ``(a_0, a_1)`` (or a ``(2, m)`` array of columns) and the channel is
    ``[[1 - e10, e01], [e10, 1 - e01]]``.
    """
    det = 1.0 - e01 - e10
    if not det > 0.0:
        raise DegenerateChannel(f"e01 + e10 = {e01 + e10} >= 1")
    a = np.asarray(a, dtype=float)
    adjugate = np.array([[1.0 - e01, -e01], [-e10, 1.0 - e10]])
    return adjugate @ a / det


def epsilon_from_marginals(p1, p1_prime, eps12, raw=False):
    """The flip rate ``e10 = P(Y'=1 | Y=0)`` implied by the marginals.

    ``p1 = P(Y = 0)``, ``p1_prime = P(Y' = 0)`` and ``eps12 = P(Y' = 0 | Y = 1)``
    (the first class is the one whose prior is given). With ``raw=True`` the
    value is returned even when the resulting channel is infeasible.
    """
    if not 0.0 < p1 < 1.0:
        raise InfeasibleRates(f"p1 = {p1} must lie in (0, 1)")
    if not 0.0 <= eps12 <= 1.0:
        raise InfeasibleRates(f"eps12 = {eps12} is outside [0, 1]")
    eps21 = (p1 - p1_prime + eps12 - eps12 * p1) / p1
    if raw:
        return eps21
    if -CLAMP_TOL <= eps21 < 0.0:
        eps21 = 0.0  # rounding at the lower end of the feasible interval
    if not 0.0 <= eps21 <= 1.0:
        raise InfeasibleRates(f"implied eps21 = {eps21:.6g} is outside [0, 1]")
    if eps12 + eps21 >= 1.0:
        raise InfeasibleRates(f"eps12 + eps21 = {eps12 + eps21:.6g} >= 1")
    return eps21


def reference_noisy_marginal(p, strength=0.1):
    """``(1 - s) p + s / K``: the image of ``p`` under a mild symmetric channel.

    Used as the default noisy marginal when a caller only supplies ``p``.
    """
    p = np.asarray(p, dtype=float)
    return SimplexVector((1.0 - strength) * p + strength / p.size)


def construct_noise_matrix(p, p_prime):
    """Stochastic ``E`` with ``E p = p'`` and positive determinant.

    Sort ``p' - p`` in decreasing order (ties keep index order), keep the
    classes that gain mass on the diagonal, shrink the classes that lose mass
    and route the lost mass upward in proportion to each gain. The permuted
    template is upper triangular, so its determinant is the product of the
    shrink factors.
    """
    p = np.asarray(validate_simplex(p), dtype=float)
    p_prime = np.asarray(validate_simplex(p_prime), dtype=float)
    if p.size != p_prime.size:
        raise ValueError(f"p has {p.size} classes but p' has {p_prime.size}")
    for name, v in (("p", p), ("p'", p_prime)):
        bad = np.flatnonzero(v <= 0)
        if bad.size:
            raise NonPositiveEntry(f"{name}[{int(bad[0])}] = {v[bad[0]]} must be > 0")
    p = p / p.sum()
    p_prime = p_prime / p_prime.sum()
    K = p.size

    order = np.argsort(-(p_prime - p), kind="stable")
    pp, qq = p[order], p_prime[order]
    gain = qq - pp
    k1 = int(np.count_nonzero(gain >= 0))
    k1 = max(k1, 1)  # rounding can leave every gain at -1e-17

    template = np.zeros((K, K))
    idx = np.arange(K)
    template[idx[:k1], idx[:k1]] = 1.0
    template[idx[k1:], idx[k1:]] = qq[k1:] / pp[k1:]
    total_gain = gain[:k1].sum()
    if k1 < K and total_gain > 0:
        loss = -gain[k1:]
        template[:k1, k1:] = np.outer(gain[:k1], loss / pp[k1:]) / total_gain

    E = np.empty((K, K))
    E[np.ix_(order, order)] = template
    return NoiseMatrix(E)


def _argmax(v):
    return int(np.argmax(v))  # first maximum: ties go to the lowest index


@dataclass(frozen=True)
class CounterexamplePair:
    """Two channels with ``E1 p = E2 p = p'`` whose Bayes rules disagree.

    ``witness_scores`` are noisy-class scores ``a``; the clean-class scores are
    ``solve(E1, a)`` and ``solve(E2, a)`` and their argmaxes differ.
    """

    E1: NoiseMatrix
    E2: NoiseMatrix
    p: SimplexVector
    p_prime: SimplexVector
    witness_scores: np.ndarray
    argmax_under_E1: int
    argmax_under_E2: int
    construction: str = ""
    delta: Optional[float] = None
    permutation: Optional[tuple] = None
    checks: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for E in (self.E1, self.E2):
            residual = np.max(np.abs(E.entries @ self.p.probs - self.p_prime.probs))
            if residual > 1e-9:
                raise ValueError(f"channel maps p to p' only within {residual:.3e}")
        if self.argmax_under_E1 == self.argmax_under_E2:
            raise ValueError("witness does not separate the two Bayes rules")
        object.__setattr__(self, "witness_scores", np.asarray(self.witness_scores, dtype=float))

    @property
    def posterior_E1(self):
        return solve_linear(self.E1.entries, self.witness_scores)

    @property
    def posterior_E2(self):
        return solve_linear(self.E2.entries, self.witness_scores)

    def to_dict(self):
        out = {
            "construction": self.construction,
            "p": self.p.to_list(),
            "p_prime": self.p_prime.to_list(),
            "E1": self.E1.to_list(),
            "E2": self.E2.to_list(),
            "det_E1": self.E1.det,
            "det_E2": self.E2.det,
            "witness_scores": self.witness_scores.tolist(),
            "posterior_E1": self.posterior_E1.tolist(),
            "posterior_E2": self.posterior_E2.tolist(),
            "argmax_under_E1": self.argmax_under_E1,
            "argmax_under_E2": self.argmax_under_E2,
        }
        if self.delta is not None:
            out["delta"] = self.delta
        if self.permutation is not None:
            out["permutation"] = list(self.permutation)
        if self.checks:
            out["checks"] = dict(self.checks)
        return out


def _simplex_grid(k, resolution):
    """Lattice points ``c / resolution`` of the simplex, lexicographic in ``c``."""
    for bars in itertools.combinations(range(resolution + k - 1), k - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(resolution + k - 2 - prev)
        yield parts


def _first_flip(scores, inv1, inv2, require_feasible):
    alpha1 = scores @ inv1.T
    alpha2 = scores @ inv2.T
    ok = np.argmax(alpha1, axis=1) != np.argmax(alpha2, axis=1)
    if require_feasible:
        ok &= (alpha1 >= -CHECK_TOL).all(axis=1) & (alpha2 >= -CHECK_TOL).all(axis=1)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else None


def find_argmax_flip(E1, E2, budget=WITNESS_BUDGET, resolution=GRID_RESOLUTION, seed=0,
                     require_feasible=True, batch=4096):
    """Noisy scores ``a`` on the simplex at which the two channels' Bayes rules differ.

    Scans the lattice of step ``1/resolution`` (at most half the budget), then
    draws clean posteriors ``alpha ~ Dirichlet(1)`` and maps them through ``E1``.
    With ``require_feasible`` both recovered posteriors must be non-negative,
    i.e. ``a`` is attainable under either channel. Raises NoFlipFound once
    ``budget`` candidates have been tried.
    """
    E1 = np.asarray(E1, dtype=float)
    E2 = np.asarray(E2, dtype=float)
    inv1, inv2 = inverse(E1), inverse(E2)
    K = E1.shape[0]
    tried = 0

    grid = _simplex_grid(K, resolution)
    grid_budget = budget // 2
    while tried < grid_budget:
        chunk = list(itertools.islice(grid, min(batch, grid_budget - tried)))
        if not chunk:
            break
        scores = np.asarray(chunk, dtype=float) / resolution
        tried += len(chunk)
        hit = _first_flip(scores, inv1, inv2, require_feasible)
        if hit is not None:
            return scores[hit]

    rng = make_rng(seed, "argmax-flip")
    while tried < budget:
        m = min(batch, budget - tried)
        alpha = rng.dirichlet(np.ones(K), size=m)
        scores = alpha @ E1.T
        scores /= scores.sum(axis=1, keepdims=True)
        tried += m
        hit = _first_flip(scores, inv1, inv2, require_feasible)
        if hit is not None:
            return scores[hit]
    raise NoFlipFound(f"no argmax disagreement in {tried} candidates")


def _make_pair(E1, E2, p, p_prime, scores, **extra):
    a1 = solve_linear(E1.entries, scores)
    a2 = solve_linear(E2.entries, scores)
    return CounterexamplePair(
        E1=E1, E2=E2, p=p, p_prime=p_prime, witness_scores=scores,
        argmax_under_E1=_argmax(a1), argmax_under_E2=_argmax(a2), **extra,
    )


def balanced_counterexample(K, p_prime=None, permutation=None):
    """Witness pair for uniform ``p``: ``E2 = E1 P`` with an even permutation ``P``.

    Because ``P p = p`` both channels give the same noisy marginal, while the
    clean posteriors under ``E2`` are those under ``E1`` permuted.
    """
    if K < 3:
        raise ValueError("the permutation construction needs K >= 3")
    p = SimplexVector.uniform(K)
    p_prime = p if p_prime is None else validate_simplex(p_prime)
    perm = PermutationMatrix.leading_three_cycle(K) if permutation is None else permutation
    if not isinstance(perm, PermutationMatrix):
        perm = PermutationMatrix(tuple(perm))
    if perm.K != K:
        raise ValueError(f"permutation acts on {perm.K} classes, expected {K}")
    if not perm.is_even or not perm.moved():
        raise ValueError("the permutation must be even and not the identity")

    E1 = construct_noise_matrix(p, p_prime)
    E2 = NoiseMatrix(E1.entries @ perm.matrix)

    # clean posterior peaked on a moved class; under E2 the peak moves with perm
    moved = perm.moved()
    alpha = np.zeros(K)
    alpha[moved[:3]] = (0.5, 0.3, 0.2)
    scores = E1.entries @ alpha
    pair = _make_pair(E1, E2, p, p_prime, scores,
                      construction="permutation", permutation=perm.perm)
    return pair


def shrinkage_counterexample(p, p_prime=None, delta=DEFAULT_DELTA, seed=0, budget=WITNESS_BUDGET):
    """Witness pair for non-uniform ``p``: ``E2 = (1 - delta) E1 + delta p' 1^T``.

    The clean posteriors satisfy ``alpha2 = (alpha1 - delta p) / (1 - delta)``,
    which is checked against a direct solve at the witness, as is
    ``det E2 = (1 - delta)^(K-1) det E1``.
    """
    p = validate_simplex(p)
    if p.is_uniform():
        raise ValueError("shrinkage never moves the argmax when p is uniform")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta = {delta} must lie in (0, 1)")
    p_prime = reference_noisy_marginal(p) if p_prime is None else validate_simplex(p_prime)
    K = p.K

    E1 = construct_noise_matrix(p, p_prime)
    E2 = NoiseMatrix((1.0 - delta) * E1.entries + delta * np.outer(p_prime.probs, np.ones(K)))
    scores = find_argmax_flip(E1, E2, budget=budget, seed=seed)

    direct = solve_linear(E2.entries, scores)
    closed = (solve_linear(E1.entries, scores) - delta * p.probs) / (1.0 - delta)
    closed_form_error = float(np.max(np.abs(direct - closed)))
    det_expected = (1.0 - delta) ** (K - 1) * E1.det
    det_error = abs(E2.det - det_expected)
    if closed_form_error > CHECK_TOL or det_error > CHECK_TOL:
        raise ArithmeticError(
            f"shrinkage identities failed: posterior {closed_form_error:.3e}, det {det_error:.3e}")
    return _make_pair(E1, E2, p, p_prime, scores, construction="shrinkage", delta=delta,
                      checks={"closed_form_error": closed_form_error, "det_error": det_error})
