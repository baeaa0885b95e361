import hashlib
import json
from collections.abc import Mapping
from copy import deepcopy
from typing import Any, Optional

import numpy as np


def deep_update(base: Mapping, override: Optional[Mapping]) -> dict:
    """
    Recursively merges ``override`` into a copy of ``base``. Nested mappings are merged key by key, every other value
    in ``override`` replaces the value in ``base``.

    Parameters
    ----------
    base
        mapping with the default values
    override
        mapping with the values that should take precedence

    Returns
    -------
    dict
        a new (plain) dictionary, neither input is modified

    """
    merged = to_plain(base)
    if not override:
        return merged
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_update(merged[key], value)
        else:
            merged[key] = to_plain(value)
    return merged


def to_plain(obj: Any) -> Any:
    """
    Converts yaml container types (and numpy scalars / arrays) into plain python dicts, lists, floats and ints.
    """
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        return float(obj)
    if isinstance(obj, str):
        return str(obj)
    return deepcopy(obj)


def config_hash(configs: Mapping) -> str:
    """
    SHA-256 hex digest of the canonical (sorted keys, plain types) json dump of the configs.
    """
    canonical = json.dumps(to_plain(configs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def get_result_name_suffix(seed: Optional[int] = None) -> str:
    """
    Generate a suffix for result file names

    Parameters
    ----------
    seed
        master seed of the run

    Returns
    -------
    str
        the suffix, empty without a seed

    """
    suffix = ""
    if seed is not None:
        suffix += f"_seed{seed}"
    return suffix


def add_end_docstrings(*docstr):
    def docstring_decorator(fn):
        fn.__doc__ = fn.__doc__ + "".join(docstr)
        return fn
    return docstring_decorator
