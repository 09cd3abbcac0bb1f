"""Regret-curve plotting for parbo benchmark summaries."""

from .cli import main, plot_summary

__version__ = "0.1.0"
