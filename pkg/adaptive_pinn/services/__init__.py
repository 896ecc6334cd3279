"""
Services for the adaptive PINN toolkit.
"""

from .blending import BlendingNeuron, blend_weights, composite_loss, lambda_p_histogram
from .eval_stats import FittedModel, ModelSpec, kde, kfold_cv, mann_whitney_u, mape, monte_carlo_cv
from .hyperopt import bayes_opt, ga_search, random_search
from .kernel_baselines import gp_fit, gp_predict, svr_fit, svr_predict
from .mlp import Mlp
from .trainer import train
from .transfer import fine_tune, layer_sweep, transfer_init

__all__ = [
    "BlendingNeuron",
    "blend_weights",
    "composite_loss",
    "lambda_p_histogram",
    "FittedModel",
    "ModelSpec",
    "kde",
    "kfold_cv",
    "mann_whitney_u",
    "mape",
    "monte_carlo_cv",
    "bayes_opt",
    "ga_search",
    "random_search",
    "gp_fit",
    "gp_predict",
    "svr_fit",
    "svr_predict",
    "Mlp",
    "train",
    "fine_tune",
    "layer_sweep",
    "transfer_init",
]
