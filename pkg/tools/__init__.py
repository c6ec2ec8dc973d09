"""Command-line tools for the chaos mobility pipeline."""

__all__ = [
    "chaosmob",
]
