"""
Retry utilities with geometric growth of a search parameter
"""

import functools
import inspect
from typing import Any, Callable, Optional, Tuple, Type

from config import SOLVER_CONFIG
from .logging_config import get_logger

logger = get_logger(__name__)


def retry_widening(
    param: str,
    max_attempts: Optional[int] = None,
    growth: Optional[float] = None,
    exceptions: Tuple[Type[BaseException], ...] = (Exception,)
):
    """
    Decorator retrying a search with a geometrically widened parameter

    On each failure the keyword argument ``param`` is multiplied by ``growth``
    before the next attempt. A ``None`` value for the parameter is left to the
    wrapped function on the first attempt and must be resolved by it; the
    resolved value is read back from the exception's ``bracket`` attribute
    when present.

    Args:
        param: Name of the numeric keyword argument to widen
        max_attempts: Maximum number of attempts (default from config)
        growth: Multiplicative growth per retry (default from config)
        exceptions: Exception types that trigger a retry

    Example:
        @retry_widening("half_width", exceptions=(NotAnEigenvalueError,))
        def refine(V, guess, half_width=None):
            ...
    """
    if max_attempts is None:
        max_attempts = SOLVER_CONFIG["bracket_attempts"]
    if growth is None:
        growth = SOLVER_CONFIG["bracket_growth"]

    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        signature = inspect.signature(func)

        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            bound = signature.bind(*args, **kwargs)
            bound.apply_defaults()

            for attempt in range(1, max_attempts + 1):
                try:
                    return func(*bound.args, **bound.kwargs)
                except exceptions as e:
                    if attempt == max_attempts:
                        logger.debug(
                            f"{func.__name__} failed after {max_attempts} attempts: {e}"
                        )
                        raise

                    current = bound.arguments.get(param)
                    if current is None:
                        bracket = getattr(e, "bracket", None)
                        if not bracket:
                            raise
                        current = 0.5 * (bracket[1] - bracket[0])
                    bound.arguments[param] = current * growth
                    logger.debug(
                        f"{func.__name__} attempt {attempt}/{max_attempts} failed: {e}. "
                        f"Retrying with {param}={bound.arguments[param]:.3e}"
                    )

        return wrapper
    return decorator
