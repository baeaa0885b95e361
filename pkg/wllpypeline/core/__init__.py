from .WLLInitializer import WLLInitializer, ExperimentConfig, ConfigError
from .ExperimentRunner import ExperimentRunner, list_schemes
from .WLLypeline import WLLParser, UIHandler, main

__all__ = [
    "WLLInitializer",
    "ExperimentConfig",
    "ConfigError",
    "ExperimentRunner",
    "list_schemes",
    "WLLParser",
    "UIHandler",
    "main",
]
