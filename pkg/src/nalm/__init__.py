"""Appliance usage detection from a single aggregate power signal."""

__version__ = "0.1.0"
