"""Numerics for the Trudinger-Moser functional with Adimurthi-Druet enhancement on weighted radial spaces."""

__version__ = "0.1.0"
