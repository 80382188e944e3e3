"""Partially polaron-transformed second-order time-local quantum master equation."""

__version__ = "0.1.0"
