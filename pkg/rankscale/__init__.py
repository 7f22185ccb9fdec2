"""
rankscale - 임베딩 effective rank (RankMe) 와 표현 품질 스케일링 법칙 도구
"""
from .fit import (FitConfig, FitResult, fit_compute_frontier, fit_joint_law,
                  fit_saturating_power_law, pareto_frontier, solve_bounded_least_squares)
from .laws import (JointDataModelLaw, SaturatingPowerLaw, evaluate, evaluate_joint, invert,
                   param_gradient)
from .rankme import RankMeScore, rankme, rankme_from_spectrum, subsample_stability_sweep
from .registry import (CheckpointRecord, ModelConfig, compute_budget, estimate_param_count,
                       group_by_config, load_checkpoints)
from .stats import early_late_correlation, pearson, r_squared, selection_agreement
from .synth import SpectrumSpec, synth_embeddings

__version__ = "0.1.0"
