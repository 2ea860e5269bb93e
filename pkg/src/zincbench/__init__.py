"""Copilot pipeline and benchmark harness for turning problem descriptions into MiniZinc."""

__version__ = "0.1.0"
