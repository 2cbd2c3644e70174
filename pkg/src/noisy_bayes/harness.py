"""Monte-Carlo comparison of the training rules on the Gaussian mixture.

Every (sample size, trial) job draws its own training set from a seed derived
from ``(master_seed, "train", n, trial)``; the test set is drawn once from
``(master_seed, "test")`` and shared. Results are sorted by key before they are
summarized or written, so the thread count never changes the output.

``evaluation="population"`` replaces the test-set accuracy by the exact
mixture accuracy of each fitted rule. The shared test set adds a common offset
to every trial, which is larger than the Oracle/WeightedERM difference at large n.
"""
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field, asdict
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (
    TARGET_NOISY_P0,
    GaussianMixtureSpec,
    bayes_accuracy,
    eps1_from_eps0,
    population_accuracy,
    sample_dataset,
)
from .errors import Diverges
from .learners import Rule, TrainConfig, evaluate, train
from .rng import derive_seed

DEFAULT_SIZES = (100, 250, 500, 1000, 2500)
ALL_RULES = (Rule.ORACLE, Rule.NAIVE, Rule.WEIGHTED_ERM, Rule.PEER_LOSS)

TRIALS_HEADER = ["rule", "n", "trial", "accuracy", "diverged"]
SUMMARY_HEADER = ["rule", "n", "mean", "stderr", "n_ok", "n_diverged"]


@dataclass(frozen=True)
class ExperimentConfig:
    p1: float = 0.5
    eps0: float = 0.3
    target_noisy_p0: float = TARGET_NOISY_P0
    sample_sizes: tuple = DEFAULT_SIZES
    n_trials: int = 100
    n_test: int = 10_000
    master_seed: int = 0
    rules: tuple = ALL_RULES
    dim: int = 2
    mean_scale: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: str = "test"

    def __post_init__(self):
        if self.evaluation not in ("test", "population"):
            raise ValueError(f"evaluation must be 'test' or 'population', got {self.evaluation!r}")
        object.__setattr__(self, "rules", tuple(Rule(r) for r in self.rules))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if isinstance(self.train, dict):
            object.__setattr__(self, "train", TrainConfig(**self.train))
        if self.n_trials < 1 or self.n_test < 1:
            raise ValueError("n_trials and n_test must be >= 1")
        if any(n < 2 for n in self.sample_sizes):
            raise ValueError("sample sizes must be >= 2")
        self.eps1  # fail fast on infeasible rates

    @property
    def eps1(self):
        return eps1_from_eps0(self.p1, self.eps0, self.target_noisy_p0)

    @property
    def spec(self):
        return GaussianMixtureSpec(self.p1, self.dim, self.mean_scale)

    def to_dict(self):
        d = asdict(self)
        d["rules"] = [r.value for r in self.rules]
        d["sample_sizes"] = list(self.sample_sizes)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class TrialRecord:
    rule: Rule
    n: int
    trial: int
    accuracy: float
    diverged: bool = False


@dataclass(frozen=True)
class SummaryRow:
    rule: Rule
    n: int
    mean: float
    stderr: float
    n_ok: int
    n_diverged: int


def summarize(records, rules=None):
    groups = {}
    for r in records:
        groups.setdefault((r.rule, r.n), []).append(r)
    order = {rule: i for i, rule in enumerate(rules or ALL_RULES)}
    rows = []
    for (rule, n), recs in sorted(groups.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0][1])):
        acc = np.array([r.accuracy for r in recs if not r.diverged], dtype=float)
        k = acc.size
        mean = float(acc.mean()) if k else math.nan
        stderr = float(acc.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
        rows.append(SummaryRow(rule, n, mean, stderr, k, len(recs) - k))
    return rows


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: tuple
    metadata: dict

    def summary(self):
        return summarize(self.records, self.config.rules)

    def mean(self, rule, n):
        for row in self.summary():
            if row.rule is Rule(rule) and row.n == n:
                return row.mean
        raise KeyError((rule, n))

    def stderr(self, rule, n):
        for row in self.summary():
            if row.rule is Rule(rule) and row.n == n:
                return row.stderr
        raise KeyError((rule, n))

    def accuracies(self, rule, n):
        return np.array([r.accuracy for r in self.records if r.rule is Rule(rule) and r.n == n])


def _run_job(config, test, n, trial):
    seed = derive_seed(config.master_seed, "train", n, trial)
    data = sample_dataset(config.spec, config.eps0, config.eps1, n, seed)
    train_config = TrainConfig(**{**asdict(config.train), "seed": seed})
    out = []
    for rule in config.rules:
        try:
            model = train(rule, data, train_config).model
        except Diverges:
            out.append(TrialRecord(rule, n, trial, math.nan, True))
            continue
        if config.evaluation == "population":
            acc = population_accuracy(model, config.spec)
        else:
            acc = evaluate(model, test.features, test.clean_labels)
        out.append(TrialRecord(rule, n, trial, acc))
    return out


def run_experiment(config, threads=1):
    test = sample_dataset(config.spec, config.eps0, config.eps1, config.n_test,
                          derive_seed(config.master_seed, "test"))
    jobs = [(n, t) for n in config.sample_sizes for t in range(config.n_trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda job: _run_job(config, test, *job), jobs))
    else:
        chunks = [_run_job(config, test, n, t) for n, t in jobs]
    order = {rule: i for i, rule in enumerate(config.rules)}
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: (order[r.rule], r.n, r.trial))
    metadata = {
        "config": config.to_dict(),
        "eps1": config.eps1,
        "noisy_p0": config.eps1 * config.p1 + (1.0 - config.eps0) * (1.0 - config.p1),
        "bayes_accuracy": bayes_accuracy(config.spec),
        "software_version": __version__,
    }
    return ExperimentResult(config, tuple(records), metadata)


def _fmt(x):
    return repr(float(x))


def export_results(result, path):
    """Write ``trials.csv``, ``summary.csv`` and ``metadata.json`` into ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIALS_HEADER)
        for r in result.records:
            w.writerow([r.rule.value, r.n, r.trial, _fmt(r.accuracy), int(r.diverged)])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in result.summary():
            w.writerow([s.rule.value, s.n, _fmt(s.mean), _fmt(s.stderr), s.n_ok, s.n_diverged])
    (out / "metadata.json").write_text(json.dumps(result.metadata, indent=2, sort_keys=True) + "\n")
    return out


def load_results(path):
    """Read an exported directory back: ``(records, summary_rows, metadata)``."""
    path = Path(path)
    with open(path / "trials.csv", newline="") as fh:
        records = [
            TrialRecord(Rule(row["rule"]), int(row["n"]), int(row["trial"]),
                        float(row["accuracy"]), bool(int(row["diverged"])))
            for row in csv.DictReader(fh)
        ]
    with open(path / "summary.csv", newline="") as fh:
        rows = [
            SummaryRow(Rule(row["rule"]), int(row["n"]), float(row["mean"]), float(row["stderr"]),
                       int(row["n_ok"]), int(row["n_diverged"]))
            for row in csv.DictReader(fh)
        ]
    metadata = json.loads((path / "metadata.json").read_text())
    return records, rows, metadata
