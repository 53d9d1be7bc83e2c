"""Numerical laboratory for the remainder of the modified Mertens formula."""

__version__ = "0.1.0"
