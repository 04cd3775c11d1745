"""Hypothesis-driven, call-graph-guided bug localization."""

__version__ = "0.1.0"
