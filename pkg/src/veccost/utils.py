import json
import math
import os
from enum import Enum

import numpy as np


def format_float(value) -> str:
    """
    Formats a number as a decimal string that round-trips exactly (17 significant
    digits at most). Integral floats keep a trailing `.0` so that readers can tell
    them apart from counters.
    """
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("Cannot serialize non-finite value %r" % value)
    return repr(value)


def to_jsonable(obj):
    """
    Converts numpy arrays and scalars, tuples and enums nested in `obj` into plain
    Python values that `json` can serialize. Floats are left as floats; `json`
    writes them with `repr`, which keeps all significant digits.
    """
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    """
    Serializes `obj` as indented JSON with sorted keys, so that identical inputs
    always produce identical bytes.
    """
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def env_int(name, default, min_value=1):
    """
    Reads a positive integer from the environment variable `name`, returning
    `default` when it is unset or empty. Raises `ValueError` for anything else.
    """
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError("%s must be an integer, got %r" % (name, raw))
    if value < min_value:
        raise ValueError("%s must be at least %d, got %d" % (name, min_value, value))
    return value


def comma_join(items, stringify=False):
    """
    Joins an iterable of strings with commas.
    """
    if stringify:
        return ", ".join(str(item) for item in items)
    else:
        return ", ".join(items)


def get_subclass_names(locals, base_class):
    from inspect import isclass

    return [c.__name__ for c in locals.values() if isclass(c) and issubclass(c, base_class)]


class VecCostException(Exception):
    """
    Base class for all errors raised by veccost.
    """
