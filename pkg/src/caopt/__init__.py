"""Measure recombination and recombination-accelerated descent methods."""

from ._kernels import NUMBA_ENABLED, backend_name
from .baselines import SGDConfig, adam, sag
from .bcd import (
    Block,
    BlockPlan,
    CaBCDConfig,
    GSPlan,
    NutiniPlan,
    RandomPlan,
    block_direction,
    block_lipschitz_ls,
    cabcd,
    gs_blocks,
    parse_rule_id,
    partition_plan,
    random_blocks,
)
from .data import (
    CsvLoadResult,
    PipelineSpec,
    add_intercept,
    apply_pipeline,
    gen_dataset_A,
    gen_exp_octant,
    gen_logistic_2d,
    gen_uniform_sine,
    load_csv,
    pca_reduce,
    standard_scale,
    tensor_power_features,
)
from .measure import (
    DiscreteMeasure,
    RecombinationResult,
    eliminate_one,
    moments,
    recombine,
    recombine_hierarchical,
    verify_recombination,
)
from .models import (
    LEAST_SQUARES,
    LOGISTIC,
    Dataset,
    ModelSpec,
    loss,
    mean_gradient,
    per_sample_gradient,
)
from .optimizers import (
    CaGDConfig,
    ConstantHessian,
    DirectionOracle,
    Rank1Hessian,
    cagd,
    control_statistic,
    direction,
    gd,
    hessian_rank1,
    momentum,
    neg_gradient,
)
from .trace import Trace

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "backend_name",
    "SGDConfig",
    "adam",
    "sag",
    "Block",
    "BlockPlan",
    "CaBCDConfig",
    "GSPlan",
    "NutiniPlan",
    "RandomPlan",
    "block_direction",
    "block_lipschitz_ls",
    "cabcd",
    "gs_blocks",
    "parse_rule_id",
    "partition_plan",
    "random_blocks",
    "CsvLoadResult",
    "PipelineSpec",
    "add_intercept",
    "apply_pipeline",
    "gen_dataset_A",
    "gen_exp_octant",
    "gen_logistic_2d",
    "gen_uniform_sine",
    "load_csv",
    "pca_reduce",
    "standard_scale",
    "tensor_power_features",
    "DiscreteMeasure",
    "RecombinationResult",
    "eliminate_one",
    "moments",
    "recombine",
    "recombine_hierarchical",
    "verify_recombination",
    "LEAST_SQUARES",
    "LOGISTIC",
    "Dataset",
    "ModelSpec",
    "loss",
    "mean_gradient",
    "per_sample_gradient",
    "CaGDConfig",
    "ConstantHessian",
    "DirectionOracle",
    "Rank1Hessian",
    "cagd",
    "control_statistic",
    "direction",
    "gd",
    "hessian_rank1",
    "momentum",
    "neg_gradient",
    "Trace",
]
