"""Model server speaking the storyworld backend protocol."""

__version__ = "0.1.0"
