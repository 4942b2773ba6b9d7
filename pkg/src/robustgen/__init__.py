"""Robust generalization and Lipschitz scaling laboratory."""

__version__ = "0.1.0"
