"""storyworld: turn linear story plots into playable interactive fiction."""

__version__ = "0.1.0"
