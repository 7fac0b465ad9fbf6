"""Answering nested regular path queries over Horn description logic KBs."""

__version__ = "0.1.0"
