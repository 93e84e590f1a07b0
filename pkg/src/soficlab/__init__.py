"""Finite models of sofic approximations: partial permutations, word groups,
exact membership checks, censuses, constructions and Monte Carlo surveys."""

__version__ = "0.1.0"
