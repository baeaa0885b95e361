from .Logger import get_logger, set_package_loglevel
from .Utils import deep_update, to_plain, config_hash, get_result_name_suffix, add_end_docstrings

__all__ = [
    "get_logger",
    "set_package_loglevel",
    "deep_update",
    "to_plain",
    "config_hash",
    "get_result_name_suffix",
    "add_end_docstrings",
]
