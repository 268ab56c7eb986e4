"""Gauging sigma models along Lie algebroids: checks and constructions."""

__version__ = "0.1.0"
