"""Anderson localization threshold on regular trees."""

__version__ = "0.1.0"
