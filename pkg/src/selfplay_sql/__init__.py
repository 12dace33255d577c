"""Self-play data augmentation toolkit for cross-domain multi-turn text-to-SQL."""

__version__ = "0.1.0"
