"""Deterministic discrete-event simulator of a Kubernetes-style scheduler."""

from ._orchestra import (
    ConfigError,
    Error,
    IoError,
    Scenario,
    SchemaError,
    best_gpu_set,
    compare,
    forecast,
    hpa_desired_replicas,
    load_scenario,
    nvlink_links,
    parse_scenario,
    run,
    train,
)

__all__ = [
    "ConfigError",
    "Error",
    "IoError",
    "Scenario",
    "SchemaError",
    "best_gpu_set",
    "compare",
    "forecast",
    "hpa_desired_replicas",
    "load_scenario",
    "nvlink_links",
    "parse_scenario",
    "run",
    "train",
]
