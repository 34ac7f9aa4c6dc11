"""Compile diagram-based OOP exercise specifications to SVG."""

__version__ = "0.1.0"
