"""Desk-scale Bayesian inference for small differentiable models."""

__version__ = "0.1.0"
