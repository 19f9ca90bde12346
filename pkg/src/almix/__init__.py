"""Pool-based active-learning simulation toolkit: cross-mix augmented training,
rank-weighted margin acquisition plus classic baselines, calibration metrics,
and a reproducible multi-seed experiment harness."""

from .cmam import (
    MixCoefficients,
    fit,
    mix_inputs,
    mix_labels,
    mixup_pair,
    train_epoch_cmam,
    train_epoch_plain,
)
from .core import Matrix, RngStream, matmul, sample_beta, shuffled_pairs
from .data import (
    Dataset,
    PoolState,
    gen_blobs,
    gen_two_moons,
    init_pool,
    load_csv,
    make_imbalanced,
    one_hot,
    save_csv,
)
from .experiment import (
    CmamConfig,
    ConfigError,
    CycleReport,
    DatasetConfig,
    ExperimentConfig,
    ImbalanceConfig,
    LoopConfig,
    ModelConfig,
    emit_reports,
    load_config,
    parse_config,
    run_experiment,
    run_trial,
    summarize,
)
from .metrics import (
    BinStats,
    EvalRecord,
    accuracy,
    bin_stats,
    evaluate,
    expected_calibration_error,
    overconfidence_error,
    save_records_csv,
)
from .model import (
    FeatureBatch,
    Layer,
    MlpModel,
    TrainConfig,
    backward,
    backward_mixed,
    forward_from,
    forward_to,
    init_model,
    init_velocity,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
    sgd_step,
    softmax_xent,
)
from .sampling import (
    ScoredCandidate,
    apply_selection,
    score_entropy,
    score_least_confidence,
    score_margin,
    score_rankedms,
    select_batch,
    select_random,
)

__version__ = "0.1.0"
