"""flowbench: coupling and autoregressive normalizing flows with calibrated
two-sample test evaluation."""

__version__ = "0.1.0"

from .flows import (ARCHITECTURES, FlowModel, Hyperparams, TrainConfig,
                    TrainReport, build_flow, load_model, nll, save_model, train)
from .metrics import (DirectionSet, StatValue, frobenius_corr, ks_1d, ks_mean,
                      sample_directions, swd, wasserstein_1d)
from .targets import (CMoGSpec, SampleBatch, log_prob_base, log_prob_cmog,
                      make_cmog, sample_base, sample_cmog)

__all__ = [
    "__version__",
    "ARCHITECTURES", "FlowModel", "Hyperparams", "TrainConfig", "TrainReport",
    "build_flow", "load_model", "nll", "save_model", "train",
    "DirectionSet", "StatValue", "frobenius_corr", "ks_1d", "ks_mean",
    "sample_directions", "swd", "wasserstein_1d",
    "CMoGSpec", "SampleBatch", "log_prob_base", "log_prob_cmog",
    "make_cmog", "sample_base", "sample_cmog",
]
