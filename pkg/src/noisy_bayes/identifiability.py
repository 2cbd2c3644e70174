"""When is the clean-label Bayes classifier determined by the noisy data?

Only for two balanced classes. In every other case two noise channels exist that
reproduce the observed noisy distribution and the clean prior yet induce
different Bayes rules; ``is_identifiable`` builds such a pair.

Binary notation follows ``channel.epsilon_from_marginals``: ``p1 = P(Y = 0)``,
``p1_prime = P(Y' = 0)``, ``eps12 = P(Y' = 0 | Y = 1)``. Given noisy scores
``(a0, a1)`` the Bayes rule picks class 0 iff ``2 a0 >= tau (a0 + a1)``.
"""
from dataclasses import dataclass
import enum
from typing import Optional, Union

import numpy as np

from .channel import (
    DEFAULT_DELTA,
    CounterexamplePair,
    balanced_counterexample,
    epsilon_from_marginals,
    invert_binary_posterior,
    reference_noisy_marginal,
    shrinkage_counterexample,
)
from .errors import InfeasibleRates
from .simplex import SIMPLEX_TOL, validate_simplex


class Reason(enum.Enum):
    BALANCED_BINARY = "BalancedBinary"
    IMBALANCED_BINARY = "ImbalancedBinary"
    MULTICLASS = "Multiclass"


@dataclass(frozen=True)
class Interval:
    """``[lo, hi)``; empty when ``lo >= hi``."""

    lo: float
    hi: float

    @property
    def empty(self):
        return not self.lo < self.hi

    def contains(self, t):
        return self.lo <= t < self.hi

    def sweep(self, n):
        if self.empty:
            return np.empty(0)
        return np.linspace(self.lo, self.hi, n, endpoint=False)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "closed": "lo", "empty": self.empty}


def binary_boundary_threshold(p1, p1_prime, eps12):
    """``tau = (p1' + eps12 (2 p1 - 1)) / p1``; raises InfeasibleRates."""
    epsilon_from_marginals(p1, p1_prime, eps12)
    return (p1_prime + eps12 * (2.0 * p1 - 1.0)) / p1


def threshold_decision(scores, tau):
    """Class 0 iff ``2 a0 >= tau (a0 + a1)``; works column-wise on ``(2, m)``."""
    a = np.asarray(scores, dtype=float)
    return np.where(2.0 * a[0] >= tau * (a[0] + a[1]), 0, 1)


def feasible_eps12_range(p1, p1_prime):
    """All ``eps12`` giving a valid binary channel for these marginals.

    From ``eps21 = (p1 - p1' + eps12 (1 - p1)) / p1``: ``eps21 >= 0`` gives the
    lower end, ``eps12 + eps21 < 1`` reduces to ``eps12 < p1'`` and the remaining
    box constraints never bind. For ``0 < p1' < 1`` the interval is non-empty;
    it collapses at ``p1' in {0, 1}``.
    """
    if not 0.0 < p1 < 1.0:
        raise InfeasibleRates(f"p1 = {p1} must lie in (0, 1)")
    if not 0.0 <= p1_prime <= 1.0:
        raise InfeasibleRates(f"p1' = {p1_prime} must lie in [0, 1]")
    lo = max(0.0, (p1_prime - p1) / (1.0 - p1))
    hi = min(1.0, p1_prime)
    return Interval(lo, hi)


@dataclass(frozen=True)
class ThresholdWitness:
    """Two feasible binary channels and a score pair they classify differently."""

    p1: float
    p1_prime: float
    eps12: tuple
    eps21: tuple
    tau: tuple
    scores: tuple
    decisions: tuple

    def to_dict(self):
        return {
            "p1": self.p1, "p1_prime": self.p1_prime,
            "eps12": list(self.eps12), "eps21": list(self.eps21), "tau": list(self.tau),
            "scores": list(self.scores), "decisions": list(self.decisions),
        }


@dataclass(frozen=True)
class IdentifiabilityVerdict:
    identifiable: bool
    reason: Reason
    witness: Optional[Union[CounterexamplePair, ThresholdWitness]] = None

    def __post_init__(self):
        if self.identifiable and self.witness is not None:
            raise ValueError("an identifiable verdict carries no witness")
        if not self.identifiable and self.witness is None:
            raise ValueError("a non-identifiable verdict needs a witness")

    def to_dict(self):
        return {
            "identifiable": self.identifiable,
            "reason": self.reason.value,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def _threshold_witness(p1, p1_prime):
    rates = feasible_eps12_range(p1, p1_prime)
    if rates.empty:
        raise InfeasibleRates(f"no binary channel maps p1 = {p1} to p1' = {p1_prime}")
    mid = 0.5 * (rates.lo + rates.hi)
    half = 0.25 * (rates.hi - rates.lo)
    # shrink the spread until the midpoint score is attainable under both channels
    for _ in range(60):
        t = (mid - half, mid + half)
        e21 = tuple(epsilon_from_marginals(p1, p1_prime, ti) for ti in t)
        tau = tuple((p1_prime + ti * (2.0 * p1 - 1.0)) / p1 for ti in t)
        r = 0.25 * (tau[0] + tau[1])
        scores = np.array([r, 1.0 - r])
        posts = [invert_binary_posterior(scores, ti, ei) for ti, ei in zip(t, e21)]
        decisions = tuple(int(threshold_decision(scores, ta)) for ta in tau)
        if decisions[0] != decisions[1] and all(np.all(a >= 0) for a in posts):
            return ThresholdWitness(
                p1=p1, p1_prime=p1_prime, eps12=t, eps21=e21, tau=tau,
                scores=(float(r), float(1.0 - r)), decisions=decisions,
            )
        half *= 0.5
    raise ArithmeticError("could not place a score between the two thresholds")


def is_identifiable(K, p, tol=SIMPLEX_TOL, p_prime=None, delta=DEFAULT_DELTA, seed=0):
    """Decide identifiability of the clean Bayes rule and attach a witness if not.

    When ``p_prime`` is omitted the noisy marginal defaults to
    ``reference_noisy_marginal(p)``.
    """
    p = validate_simplex(p)
    if K < 2 or p.K != K:
        raise ValueError(f"K = {K} does not match a prior over {p.K} classes")
    if p_prime is not None:
        p_prime = validate_simplex(p_prime)
        if p_prime.K != K:
            raise ValueError(f"p' has {p_prime.K} classes, expected {K}")

    if K == 2:
        if abs(p.probs[0] - 0.5) <= tol:
            return IdentifiabilityVerdict(True, Reason.BALANCED_BINARY)
        noisy = p_prime if p_prime is not None else reference_noisy_marginal(p)
        witness = _threshold_witness(float(p.probs[0]), float(noisy.probs[0]))
        return IdentifiabilityVerdict(False, Reason.IMBALANCED_BINARY, witness)

    if p.is_uniform(tol):
        witness = balanced_counterexample(K, p_prime=p_prime)
    else:
        witness = shrinkage_counterexample(p, p_prime=p_prime, delta=delta, seed=seed)
    return IdentifiabilityVerdict(False, Reason.MULTICLASS, witness)


def explain(verdict):
    w = verdict.witness
    if verdict.identifiable:
        return ("Identifiable: two balanced classes. The Bayes decision threshold does not "
                "depend on the unknown flip rate, so every compatible channel gives the same rule.")
    if verdict.reason is Reason.IMBALANCED_BINARY:
        return (f"Not identifiable: imbalanced binary prior P(Y=0) = {w.p1:.6g}. "
                f"Flip rates eps12 = {w.eps12[0]:.6g} and {w.eps12[1]:.6g} both reproduce "
                f"P(Y'=0) = {w.p1_prime:.6g} but give thresholds tau = {w.tau[0]:.6g} vs "
                f"{w.tau[1]:.6g}; scores {tuple(round(s, 6) for s in w.scores)} are classified "
                f"{w.decisions[0]} vs {w.decisions[1]}.")
    kind = "permuted" if w.construction == "permutation" else "shrunk"
    return (f"Not identifiable: {w.p.K} classes. E1 and a {kind} E2 both map p to p', yet at "
            f"noisy scores {np.round(w.witness_scores, 6).tolist()} the Bayes class is "
            f"{w.argmax_under_E1} under E1 and {w.argmax_under_E2} under E2.")
