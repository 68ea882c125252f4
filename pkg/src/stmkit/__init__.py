"""Sparse topic model estimation from word counts and known anchor words."""
from .estimator import EstimationReport, STMConfig, recover_from_population, run_stm
from .evaluation import aligned_l1_loss, sweep_rate, sweep_sparsity
from .model import (AnchorPartition, CorpusCounts, ModelError, TopicMatrix, WeightMatrix,
                    population_moments, validate_model)
from .synthgen import SynthConfig, make_dataset

__version__ = "0.1.0"
