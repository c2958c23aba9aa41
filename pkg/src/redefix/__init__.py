"""ReDeFix: detection and retrieval-augmented repair of responsive layout failures."""

__version__ = "0.1.0"
