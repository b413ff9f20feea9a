"""Constructive approximate Hamilton decompositions of dense robustly expanding digraphs."""

__version__ = "0.1.0"
