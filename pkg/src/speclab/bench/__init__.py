"""Benchmark harness: datasets, configuration, runners, metrics and reports."""

from .config import METHODS, BenchConfig, ConfigError, load_config
from .dataset import CATEGORIES, BenchSample, DatasetError, load_dataset, write_dataset
from .fixtures import fixture_path, load_fixture, synthetic_dataset
from .metrics import MatPolicy, ProbeTable, compute_mat, latency_cdf, relevance_probe
from .report import csv_rows, emit_report, load_report, report_json, strip_wallclock
from .runner import RunReport, SampleResult, batched_run, run_experiment

__all__ = [
    "METHODS", "BenchConfig", "ConfigError", "load_config",
    "CATEGORIES", "BenchSample", "DatasetError", "load_dataset", "write_dataset",
    "fixture_path", "load_fixture", "synthetic_dataset",
    "MatPolicy", "ProbeTable", "compute_mat", "latency_cdf", "relevance_probe",
    "csv_rows", "emit_report", "load_report", "report_json", "strip_wallclock",
    "RunReport", "SampleResult", "batched_run", "run_experiment",
]
