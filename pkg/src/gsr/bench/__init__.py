"""Benchmarks, baselines, experiment drivers and the command line."""

from .functions import FUNCTIONS, BenchmarkSpec, eval_benchmark

__all__ = ["FUNCTIONS", "BenchmarkSpec", "eval_benchmark"]
