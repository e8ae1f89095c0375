"""Change-of-bases abstraction of polynomial systems."""

__version__ = "0.1.0"
