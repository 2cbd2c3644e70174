"""Command-line entry point: ``noisy-bayes <subcommand> [options]``.

Exit codes: 0 success, 1 other library error (bad input, peer-loss divergence),
2 infeasible configuration, 3 I/O error.
"""
import argparse
from dataclasses import asdict, fields
import json
import sys

import numpy as np

from .channel import (
    DEFAULT_DELTA,
    balanced_counterexample,
    construct_noise_matrix,
    reference_noisy_marginal,
    shrinkage_counterexample,
)
from .datagen import GaussianMixtureSpec, eps1_from_eps0, load_dataset, sample_dataset, save_dataset
from .errors import InfeasibleConfiguration, NoisyLabelError
from .harness import ExperimentConfig, export_results, run_experiment
from .identifiability import explain, is_identifiable
from .learners import (
    LinearModel,
    LossKind,
    Rule,
    TrainConfig,
    peer_divergence_direction,
    peer_risk_simplified,
    train,
)
from .simplex import PermutationMatrix, SimplexVector, validate_simplex

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


def parse_vector(text):
    """``"0.3,0.7"`` or ``"[0.3, 0.7]"`` -> list of floats."""
    text = text.strip()
    if text.startswith("["):
        return [float(v) for v in json.loads(text)]
    return [float(v) for v in text.split(",") if v.strip()]


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _emit(doc, out):
    text = json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _pick(args, name, config, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def cmd_simulate(args):
    cfg = _load_config(args.config)
    p1 = _pick(args, "p1", cfg, 0.5)
    eps0 = _pick(args, "eps0", cfg, 0.3)
    eps1 = _pick(args, "eps1", cfg, None)
    if eps1 is None:
        eps1 = eps1_from_eps0(p1, eps0, _pick(args, "target_noisy_p0", cfg, 0.4))
    spec = GaussianMixtureSpec(p1, _pick(args, "dim", cfg, 2), _pick(args, "mean_scale", cfg, 0.5))
    seed = _pick(args, "seed", cfg, 0)
    data = sample_dataset(spec, eps0, eps1, _pick(args, "n", cfg, 2500), seed)
    path = save_dataset(data, args.out or "dataset.csv")
    print(json.dumps({"csv": str(path), **data.metadata()}, sort_keys=True))


def _train_config(args, cfg):
    keys = {f.name for f in fields(TrainConfig)}
    merged = {k: v for k, v in cfg.items() if k in keys}
    for name in ("learning_rate", "max_iters", "grad_tol", "l2", "seed"):
        if getattr(args, name, None) is not None:
            merged[name] = getattr(args, name)
    if args.peer_sampled:
        merged["peer_sampled"] = True
    return TrainConfig(**merged)


def cmd_train(args):
    cfg = _load_config(args.config)
    rule = Rule(_pick(args, "rule", cfg, "WeightedERM"))
    data = load_dataset(args.data)
    result = train(rule, data, _train_config(args, cfg))
    _emit(result.to_dict(), args.out)


def cmd_identify(args):
    p = parse_vector(args.p)
    k = args.k if args.k is not None else len(p)
    p_prime = parse_vector(args.p_prime) if args.p_prime else None
    verdict = is_identifiable(k, p, tol=args.tol, p_prime=p_prime, delta=args.delta,
                              seed=args.seed or 0)
    doc = verdict.to_dict()
    doc["explanation"] = explain(verdict)
    _emit(doc, args.out)
    print(doc["explanation"], file=sys.stderr)


def cmd_construct_noise(args):
    p = validate_simplex(parse_vector(args.p))
    p_prime = validate_simplex(parse_vector(args.p_prime))
    E = construct_noise_matrix(p, p_prime)
    residual = float(np.max(np.abs(E.entries @ p.probs - p_prime.probs)))
    _emit({"p": p.to_list(), "p_prime": p_prime.to_list(), "E": E.to_list(),
           "det": E.det, "residual": residual}, args.out)


def cmd_counterexample(args):
    if args.p:
        p = validate_simplex(parse_vector(args.p))
    elif args.k:
        p = SimplexVector.uniform(args.k)
    else:
        raise NoisyLabelError("give --p or --k")
    p_prime = validate_simplex(parse_vector(args.p_prime)) if args.p_prime else None
    if p.is_uniform():
        perm = PermutationMatrix(tuple(int(v) for v in parse_vector(args.perm))) if args.perm else None
        pair = balanced_counterexample(p.K, p_prime=p_prime, permutation=perm)
    else:
        pair = shrinkage_counterexample(p, p_prime=p_prime or reference_noisy_marginal(p),
                                        delta=args.delta, seed=args.seed or 0)
    _emit(pair.to_dict(), args.out)


def cmd_peer_check(args):
    data = load_dataset(args.data).observed()
    v = peer_divergence_direction(data)
    doc = {"n": data.n, "diverges": v is not None, "direction": None if v is None else v.tolist()}
    if v is not None:
        doc["peer_risk_along_direction"] = {
            str(t): peer_risk_simplified(LinearModel(t * v, 0.0), data, LossKind.LOGISTIC)
            for t in (1, 10, 100)
        }
    _emit(doc, args.out)


def cmd_experiment(args):
    cfg = _load_config(args.config)
    for name, key in (("p1", "p1"), ("eps0", "eps0"), ("target_noisy_p0", "target_noisy_p0"),
                      ("trials", "n_trials"), ("n_test", "n_test"), ("evaluation", "evaluation")):
        if getattr(args, name) is not None:
            cfg[key] = getattr(args, name)
    if args.sizes:
        cfg["sample_sizes"] = [int(v) for v in parse_vector(args.sizes)]
    if args.rules is not None:
        cfg["rules"] = [r for r in args.rules.split(",") if r]
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    config = ExperimentConfig.from_dict(cfg)
    result = run_experiment(config, threads=args.threads)
    out = export_results(result, args.out or "results")
    print(f"{'rule':<12} {'n':>6} {'mean':>8} {'stderr':>8} {'ok':>4} {'div':>4}")
    for row in result.summary():
        print(f"{row.rule.value:<12} {row.n:>6} {row.mean:>8.4f} {row.stderr:>8.4f} "
              f"{row.n_ok:>4} {row.n_diverged:>4}")
    print(f"eps1 = {config.eps1:.6g}; wrote {out}/trials.csv, summary.csv, metadata.json")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (master seed for experiment)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None, help="JSON file with option values")
    common.add_argument("--threads", type=int, default=1, help="worker threads (experiment)")

    parser = argparse.ArgumentParser(prog="noisy-bayes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="sample the Gaussian-mixture dataset to CSV")
    s.add_argument("--p1", type=float)
    s.add_argument("--eps0", type=float)
    s.add_argument("--eps1", type=float, help="default: derived from --target-noisy-p0")
    s.add_argument("--target-noisy-p0", dest="target_noisy_p0", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--mean-scale", dest="mean_scale", type=float)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", parents=[common], help="fit one rule on a dataset CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--rule", choices=[r.value for r in Rule])
    s.add_argument("--learning-rate", dest="learning_rate", type=float)
    s.add_argument("--max-iters", dest="max_iters", type=int)
    s.add_argument("--grad-tol", dest="grad_tol", type=float)
    s.add_argument("--l2", type=float)
    s.add_argument("--peer-sampled", dest="peer_sampled", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("identify", parents=[common], help="decide identifiability and show a witness")
    s.add_argument("--k", type=int)
    s.add_argument("--p", required=True)
    s.add_argument("--p-prime", dest="p_prime")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("construct-noise", parents=[common], help="stochastic E with E p = p'")
    s.add_argument("--p", required=True)
    s.add_argument("--p-prime", dest="p_prime", required=True)
    s.set_defaults(func=cmd_construct_noise)

    s = sub.add_parser("counterexample", parents=[common], help="two channels with different Bayes rules")
    s.add_argument("--k", type=int, help="uniform prior over K classes")
    s.add_argument("--p")
    s.add_argument("--p-prime", dest="p_prime")
    s.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    s.add_argument("--perm", help="even permutation for the uniform case, e.g. 1,2,0")
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("peer-check", parents=[common], help="is the logistic peer risk unbounded?")
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_peer_check)

    s = sub.add_parser("experiment", parents=[common], help="run the Monte-Carlo comparison")
    s.add_argument("--p1", type=float)
    s.add_argument("--eps0", type=float)
    s.add_argument("--target-noisy-p0", dest="target_noisy_p0", type=float)
    s.add_argument("--sizes", help="comma-separated training sizes")
    s.add_argument("--trials", type=int)
    s.add_argument("--n-test", dest="n_test", type=int)
    s.add_argument("--rules", help="comma-separated subset of " + ",".join(r.value for r in Rule))
    s.add_argument("--evaluation", choices=["test", "population"])
    s.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except InfeasibleConfiguration as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NoisyLabelError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
