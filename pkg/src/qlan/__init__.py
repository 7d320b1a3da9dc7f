"""Asymptotic Fisher information and local asymptotic normality for
quantum Markov processes."""

__version__ = "0.1.0"
