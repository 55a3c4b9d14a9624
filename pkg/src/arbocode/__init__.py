"""Symbolic codings of geodesic flows on trees from finite graphs of finite groups."""

__version__ = "0.1.0"
