"""Experiment harness: runs, sweeps, metrics, plots and reports."""
