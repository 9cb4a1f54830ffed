"""livesketch: interactive stroke-based image search with query suggestions."""

__version__ = "0.1.0"
