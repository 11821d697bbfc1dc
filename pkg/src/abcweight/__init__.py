"""Adaptive summary-statistic weighting for ABC-SMC."""

__version__ = "0.1.0"
