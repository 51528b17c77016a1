"""Robust differentiable neural architecture search on a numpy autodiff core."""

__version__ = "0.1.0"
