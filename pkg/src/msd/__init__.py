"""Multi-factor sequential disentanglement toolkit."""

__version__ = "0.1.0"
