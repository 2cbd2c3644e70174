"""Synthetic two-class Gaussian mixture with class-conditional label flips.

``Y ~ Bernoulli(p1)``, ``X | Y = y ~ N((2y - 1) * mean_scale * 1, I)``, and the
noisy label flips class 0 with rate ``eps0`` and class 1 with rate ``eps1``.
"""
from dataclasses import dataclass, asdict
import json
import math
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .channel import NoiseMatrix, corrupt_labels
from .errors import InfeasibleRates
from .learners import LinearModel
from .rng import box_muller, derive_seed, make_rng

TARGET_NOISY_P0 = 0.4


@dataclass(frozen=True)
class GaussianMixtureSpec:
    p1: float = 0.5
    dim: int = 2
    mean_scale: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p1 < 1.0:
            raise InfeasibleRates(f"p1 = {self.p1} must lie in (0, 1)")
        if self.dim < 1:
            raise ValueError(f"dim = {self.dim} must be >= 1")

    def class_mean(self, y):
        return (2 * y - 1) * self.mean_scale * np.ones(self.dim)


@dataclass(frozen=True)
class NoisyDataset:
    """What a learner is allowed to see: features and noisy labels only."""

    features: np.ndarray
    noisy_labels: np.ndarray

    @property
    def n(self):
        return self.noisy_labels.shape[0]


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    clean_labels: np.ndarray
    noisy_labels: np.ndarray
    seed: int = 0
    spec: GaussianMixtureSpec = None
    eps0: float = 0.0
    eps1: float = 0.0

    def __post_init__(self):
        n = self.features.shape[0]
        if self.clean_labels.shape != (n,) or self.noisy_labels.shape != (n,):
            raise ValueError("features, clean_labels and noisy_labels must share length n")
        for labels in (self.clean_labels, self.noisy_labels):
            if labels.size and not np.isin(labels, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")

    @property
    def n(self):
        return self.features.shape[0]

    def observed(self):
        return NoisyDataset(self.features, self.noisy_labels)

    def metadata(self):
        return {
            "n": self.n,
            "seed": self.seed,
            "spec": None if self.spec is None else asdict(self.spec),
            "eps0": self.eps0,
            "eps1": self.eps1,
        }


def check_binary_rates(eps0, eps1):
    for name, rate in (("eps0", eps0), ("eps1", eps1)):
        if not 0.0 <= rate <= 1.0:
            raise InfeasibleRates(f"{name} = {rate:.6g} is outside [0, 1]")
    if eps0 + eps1 >= 1.0:
        raise InfeasibleRates(f"eps0 + eps1 = {eps0 + eps1:.6g} >= 1")


def eps1_from_eps0(p1, eps0, target_noisy_p0=TARGET_NOISY_P0):
    """Class-1 flip rate that makes ``P(Y' = 0)`` equal ``target_noisy_p0``."""
    if not 0.0 < p1 < 1.0:
        raise InfeasibleRates(f"p1 = {p1} must lie in (0, 1)")
    eps1 = (target_noisy_p0 - (1.0 - eps0) * (1.0 - p1)) / p1
    check_binary_rates(eps0, eps1)
    return eps1


def sample_dataset(spec, eps0, eps1, n, seed):
    check_binary_rates(eps0, eps1)
    if n < 1:
        raise ValueError(f"n = {n} must be >= 1")
    clean = (make_rng(seed, "clean").random(n) < spec.p1).astype(np.int64)
    noise = box_muller(make_rng(seed, "features"), (n, spec.dim))
    features = spec.mean_scale * (2 * clean - 1)[:, None] + noise
    channel = NoiseMatrix.binary(eps0, eps1)
    noisy = corrupt_labels(clean, channel, derive_seed(seed, "noise"))
    return LabeledDataset(features, clean, noisy, seed=seed, spec=spec, eps0=eps0, eps1=eps1)


def analytic_bayes_classifier(spec):
    """Exact Bayes rule: logit ``2 s 1^T x + log(p1 / (1 - p1))``."""
    weights = 2.0 * spec.mean_scale * np.ones(spec.dim)
    return LinearModel(weights, math.log(spec.p1 / (1.0 - spec.p1)))


def bayes_accuracy(spec):
    """Accuracy of ``analytic_bayes_classifier(spec)`` on clean labels."""
    model = analytic_bayes_classifier(spec)
    mean = 2.0 * spec.mean_scale ** 2 * spec.dim  # E[w.x | Y=1]
    sd = 2.0 * spec.mean_scale * math.sqrt(spec.dim)
    phi = NormalDist().cdf
    b = model.bias
    return spec.p1 * phi((mean + b) / sd) + (1.0 - spec.p1) * phi((mean - b) / sd)


def population_accuracy(model, spec):
    """Exact clean-label accuracy of a linear rule under the mixture."""
    w, b = model.weights, model.bias
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if scale == 0.0:
        return spec.p1 if b >= 0 else 1.0 - spec.p1
    w, b = w / scale, b / scale  # the rule is scale-free; avoids underflow in the norm
    norm = float(np.linalg.norm(w))
    phi = NormalDist().cdf
    hit1 = phi((w @ spec.class_mean(1) + b) / norm)
    hit0 = phi(-(w @ spec.class_mean(0) + b) / norm)
    return float(spec.p1 * hit1 + (1.0 - spec.p1) * hit0)


def _sidecar(path):
    return Path(path).with_suffix(".json")


def save_dataset(dataset, path):
    """CSV ``x_0..x_{d-1},y,y_noisy`` plus a JSON sidecar next to it."""
    path = Path(path)
    d = dataset.features.shape[1]
    header = ",".join([f"x_{i}" for i in range(d)] + ["y", "y_noisy"])
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row, y, yn in zip(dataset.features, dataset.clean_labels, dataset.noisy_labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(y)},{int(yn)}\n")
    _sidecar(path).write_text(json.dumps(dataset.metadata(), indent=2, sort_keys=True) + "\n")
    return path


def load_dataset(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[-2:] != ["y", "y_noisy"]:
        raise ValueError(f"{path}: expected trailing columns y,y_noisy, got {header[-2:]}")
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    if _sidecar(path).exists():
        meta = json.loads(_sidecar(path).read_text())
    spec = GaussianMixtureSpec(**meta["spec"]) if meta.get("spec") else None
    return LabeledDataset(
        features=raw[:, :-2].copy(),
        clean_labels=raw[:, -2].astype(np.int64),
        noisy_labels=raw[:, -1].astype(np.int64),
        seed=meta.get("seed", 0),
        spec=spec,
        eps0=meta.get("eps0", 0.0),
        eps1=meta.get("eps1", 0.0),
    )
