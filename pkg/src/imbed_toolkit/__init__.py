"""Imbedding Toolkit - parameter imbedding for [I + f(lambda)]psi = phi."""

__version__ = "0.1.0"
