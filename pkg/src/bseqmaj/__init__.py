"""Majority automata networks under block-sequential updating, and reduction compilers."""

__version__ = "0.1.0"
