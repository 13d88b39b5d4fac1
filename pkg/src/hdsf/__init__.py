"""Hierarchical discourse-level structure for fake news detection."""

__version__ = "0.1.0"
