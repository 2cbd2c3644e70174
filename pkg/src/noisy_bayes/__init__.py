"""Classification with noisy labels: identifiability of the Bayes rule,
weighted ERM, peer loss, and a reproducible synthetic experiment."""

__version__ = "0.1.0"

from .simplex import (  # noqa: E402
    DiscreteJoint,
    PermutationMatrix,
    SimplexVector,
    StochasticMatrix,
    check_conditional_independence,
    matrix_determinant,
    reweight_to_balanced_noisy,
    solve_linear,
    validate_simplex,
)
from .channel import (  # noqa: E402
    CounterexamplePair,
    NoiseMatrix,
    balanced_counterexample,
    construct_noise_matrix,
    corrupt_labels,
    epsilon_from_marginals,
    find_argmax_flip,
    invert_binary_posterior,
    shrinkage_counterexample,
)
from .identifiability import (  # noqa: E402
    IdentifiabilityVerdict,
    Reason,
    binary_boundary_threshold,
    explain,
    feasible_eps12_range,
    is_identifiable,
)
from .learners import (  # noqa: E402
    LinearModel,
    LossKind,
    Rule,
    TrainConfig,
    empirical_class_weights,
    evaluate,
    peer_divergence_direction,
    peer_risk_raw,
    peer_risk_simplified,
    train,
    weighted_erm_risk,
)
from .datagen import (  # noqa: E402
    GaussianMixtureSpec,
    LabeledDataset,
    analytic_bayes_classifier,
    eps1_from_eps0,
    sample_dataset,
)
from .harness import ExperimentConfig, ExperimentResult, export_results, run_experiment  # noqa: E402
