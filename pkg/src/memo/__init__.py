"""Weight-free context optimization for two-player text games."""

__version__ = "0.1.0"
