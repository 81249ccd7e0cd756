"""Experiment harness: data handling, model pipelines, cross-validation and CLI."""
