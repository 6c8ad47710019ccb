"""Differentially private synthesis of spatiotemporal trajectories.

Raw GPS trajectories are mapped onto a grid of space-time cubes, a noisy
first-order Markov model over cubes is built under a privacy budget, and
synthetic trajectories are sampled from it.
"""
from ._backend import BACKEND
from .dp import NOISE_OFF, NoiseSource, PrivacyBudget, split_budget
from .grid import Cube, CubeDataset, CubeTrajectory, GridSpec, SpatioTemporalDomain, discretize_dataset
from .ingest import RawDataset, RawTrajectory, filter_dataset, parse_jsonl_dataset, parse_porto_csv
from .metrics import EvalGrid, EvalParams, MetricsReport, evaluate_all
from .model import SynthModel, build_model, load_model, save_model
from .synth import GenerationConfig, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "NOISE_OFF",
    "Cube",
    "CubeDataset",
    "CubeTrajectory",
    "EvalGrid",
    "EvalParams",
    "GenerationConfig",
    "GridSpec",
    "MetricsReport",
    "NoiseSource",
    "PrivacyBudget",
    "RawDataset",
    "RawTrajectory",
    "SpatioTemporalDomain",
    "SynthModel",
    "build_model",
    "discretize_dataset",
    "evaluate_all",
    "filter_dataset",
    "generate_dataset",
    "load_model",
    "parse_jsonl_dataset",
    "parse_porto_csv",
    "save_model",
    "split_budget",
]
