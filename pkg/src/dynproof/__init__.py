"""Dynamic semi-algebraic proof search for stable-set upper bounds."""

__version__ = "0.1.0"
