"""CLI, configuration, persistence, and metric export."""

from langrl.harness.config import ConfigError, RunConfig, load_sections, serialize_sections
from langrl.harness.metrics_export import EmptyRun, export_metrics, write_metrics_csv

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_sections",
    "serialize_sections",
    "EmptyRun",
    "export_metrics",
    "write_metrics_csv",
]
