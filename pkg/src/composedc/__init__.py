"""Composable data center power modeling and energy-aware placement."""

__version__ = "0.1.0"
