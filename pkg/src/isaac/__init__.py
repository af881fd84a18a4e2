"""Book-enjoyment introspection and recommendation pipeline."""

__version__ = "0.1.0"
