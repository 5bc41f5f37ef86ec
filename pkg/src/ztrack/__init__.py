"""Decentralized gradient tracking from single noisy function queries.

Agents on a connected graph minimize the average of their local costs
while only ever observing noisy scalar evaluations.  Each iteration
spends exactly one query per agent: the observed value tilts a random
direction into a gradient surrogate, and a tracking recursion over the
mixing matrix keeps every agent pointed at the network-wide descent
direction.
"""

from .config import ExperimentConfig, ParseError, ValidationError, load_config
from .engine import (
    DivisionDomain,
    InvalidSchedule,
    MetricsRow,
    RateConstants,
    StepSchedule,
    SwarmState,
    init,
    metrics,
    rate_bound,
    rate_constants,
    step,
    validate_schedule,
)
from .estimators import (
    BiasReport,
    GradientEstimate,
    Perturbation,
    bias_characterize,
    coordinate_2d_point,
    fo_noisy,
    one_point,
    sample_perturbation,
    two_point,
)
from .objectives import (
    Dataset,
    DimensionMismatch,
    NoiseModel,
    Objective,
    TooFewSamples,
    load_dataset,
    logistic_objective,
    partition,
    quadratic_objective,
    save_dataset,
)
from .oracles import (
    InsufficientData,
    OracleReport,
    SizeGuard,
    consensus_summability_check,
    dense_spectral_norm,
    finite_diff_grad,
    gradient_mismatch_check,
)
from .outputs import emit_outputs
from .runner import (
    RunResult,
    accuracy_of,
    compare_baselines,
    gen_two_gaussians,
    run_experiment,
)
from .topology import (
    ConnectivityFailure,
    Graph,
    MixingMatrix,
    NonConvergence,
    gen_erdos_renyi,
    laplacian_weights,
    load_edge_list,
    save_edge_list,
    spectral_gap,
    validate_mixing,
)

__version__ = "0.1.0"
