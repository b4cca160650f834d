"""Minimum-time motorcycle racelines on nonplanar parametric road surfaces."""

__version__ = "0.1.0"
