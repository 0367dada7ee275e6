"""Gomoku self-play reinforcement learning stack."""

__version__ = "0.1.0"
