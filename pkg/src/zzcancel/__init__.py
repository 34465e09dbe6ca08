"""Tracing and cancelling coherent Z-Z crosstalk in Steane |+> preparation circuits."""

__version__ = "0.1.0"
