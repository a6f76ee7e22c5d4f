"""Config-driven experiment runner, result CSVs, SVG plots and operation counts."""

from .complexity import ComplexityReport, complexity_report
from .config import AXES, METHODS, ConfigError, ExperimentConfig, load_config, parse_config
from .plot import plot_csv, plot_rows
from .results import ResultRow, SchemaError, read_csv, rows_to_csv, validate_row, write_csv
from .runner import NonFiniteMetric, run_point, run_sweep

__all__ = [
    "ComplexityReport", "complexity_report", "AXES", "METHODS", "ConfigError",
    "ExperimentConfig", "load_config", "parse_config", "plot_csv", "plot_rows", "ResultRow",
    "SchemaError", "read_csv", "rows_to_csv", "validate_row", "write_csv", "NonFiniteMetric",
    "run_point", "run_sweep",
]
