"""Reachability-based safety filtering for discrete-time motion plans."""

__version__ = "0.1.0"
