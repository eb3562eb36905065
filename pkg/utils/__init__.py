"""
Utility module initialization
"""

from .logging_config import setup_logging, get_logger
from .retry import retry_widening

__all__ = ['setup_logging', 'get_logger', 'retry_widening']
