import hashlib
import json
import time
from functools import wraps
from typing import Any

from rbnoise.logger import logger


def timeit(threshold: float):
    """
    Decorator to measure the execution time of a function and log it if it exceeds a threshold.
    """

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            result = func(*args, **kwargs)
            end_time = time.perf_counter()
            total_time = (end_time - start_time) * 1000  # Convert to milliseconds
            if total_time > threshold:
                logger.warning(f"Function {func.__name__} took {total_time:.4f} milliseconds")
            return result

        return wrapper

    return decorator


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def generate_short_hash(payload: Any, length: int = 12) -> str:
    """Stable short hash of a JSON-serialisable payload."""
    raw = payload if isinstance(payload, str) else canonical_json(payload)
    return hashlib.sha1(raw.encode("utf-8")).hexdigest()[:length]


def format_float(value: float, spec: str = ".17g") -> str:
    return format(float(value), spec)
