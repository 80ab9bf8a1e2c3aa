"""Experiment configuration, runners, benchmarks and result files"""

from .bench import bench_backward
from .config import BenchConfig, DatasetConfig, EnvConfig, ExperimentConfig, GradcheckConfig
from .gradcheck import gradcheck
from .results import ResultsWriter
from .runner import build_expert, build_learner, run_experiment
