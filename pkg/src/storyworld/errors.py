"""Exception hierarchy shared across the storyworld package."""


class StoryworldError(Exception):
    """Base class for all errors raised by this package."""
