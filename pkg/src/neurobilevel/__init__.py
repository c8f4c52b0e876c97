"""Learned value-function reformulations for bilevel programs with binary tender."""

__version__ = "0.1.0"
