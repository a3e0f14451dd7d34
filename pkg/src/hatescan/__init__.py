"""Hate-speech and sentiment classification toolkit for comment corpora."""

__version__ = "0.1.0"
