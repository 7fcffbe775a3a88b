"""Desk-scale simulation of quantum measurement compression."""

__version__ = "0.1.0"
