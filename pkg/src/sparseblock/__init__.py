"""Spectra of sparse random block matrices and their effective-medium limits."""

__version__ = "0.1.0"
