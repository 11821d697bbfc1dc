"""Experiment configuration, metrics, artifacts and table reproduction."""
