"""Zeroth-order stochastic Frank-Wolfe with double variance reduction.

Query-metered finite-sum objectives, two-point Gaussian gradient estimators,
norm-ball constraints with linear minimization oracles, the ZSFW-DVR solver
with three zeroth-order Frank-Wolfe baselines, and a benchmark runner.
"""

from .constraints import L1Ball, L2Ball, fw_gap, project_l1_ball
from .data import (
    Dataset,
    LibsvmParseError,
    dataset_stats,
    load_libsvm,
    max_abs_scale,
    parse_libsvm,
    scale_labels_pm1,
    synth_logistic,
    synth_regression,
    write_libsvm,
)
from .estimators import (
    MU_FLOOR,
    EstimatorError,
    VRTracker,
    coordinate_estimate,
    estimate_batch,
    estimate_direction,
    tracker_full_update,
    tracker_init,
    tracker_minibatch_update,
)
from .numerics import GaussianSampler, SparseVector
from .objectives import (
    CapabilityError,
    CorrentropyObjective,
    FiniteSumObjective,
    LogisticObjective,
    QuadraticExampleObjective,
    QueryMeter,
    QueryOracle,
    SoftmaxAttackObjective,
    load_attack_model,
    true_gradient,
)
from .schedules import GammaSchedule, MuSchedule, gamma_at, mu_at
from .solvers import (
    SOLVERS,
    SolverConfig,
    Trace,
    acc_szofw,
    pgd_reference,
    zofwgd,
    zofwsgd,
    zsfw_dvr,
)

__version__ = "0.1.0"
