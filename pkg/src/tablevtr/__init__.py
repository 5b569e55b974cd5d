"""Tag-anchored video-text retrieval at desk scale."""

__version__ = "0.1.0"
