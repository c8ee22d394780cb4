"""Sentidrop predicts student dropout from tabular records and comment sentiment.

This is the main entry point of the package.
"""

from sentidrop.api import load_inputs, run

__all__ = ("load_inputs", "run")
