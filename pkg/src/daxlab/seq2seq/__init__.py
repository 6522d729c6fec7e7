"""From-scratch encoder-decoder LSTM baseline and its architecture sweep."""

from .kernels import NUMBA_ENABLED
from .model import (
    ARCH_ATTENTION,
    ARCH_NO_ATTENTION,
    DivergenceError,
    InvalidConfigError,
    ModelConfig,
    ModelError,
    ModelParams,
    TrainConfig,
    UnknownTokenError,
    Vocab,
    backward,
    decode_greedy,
    example_loss,
    forward,
    init_model,
    load_params,
    param_count,
    sample_masks,
    save_params,
    train,
    vocab_for_spec,
)
from .sweep import (
    SweepRow,
    architecture_grid,
    exact_match,
    halving_sweep,
    run_generalization_experiment,
    run_one,
    summarize,
    test_items,
    training_items,
    write_csv,
)

__all__ = [
    "ARCH_ATTENTION",
    "ARCH_NO_ATTENTION",
    "DivergenceError",
    "InvalidConfigError",
    "ModelConfig",
    "ModelError",
    "ModelParams",
    "NUMBA_ENABLED",
    "SweepRow",
    "TrainConfig",
    "UnknownTokenError",
    "Vocab",
    "architecture_grid",
    "backward",
    "decode_greedy",
    "exact_match",
    "example_loss",
    "forward",
    "halving_sweep",
    "init_model",
    "load_params",
    "param_count",
    "run_generalization_experiment",
    "run_one",
    "sample_masks",
    "save_params",
    "summarize",
    "test_items",
    "train",
    "training_items",
    "vocab_for_spec",
    "write_csv",
]
