"""Finite-trait Lotka-Volterra dynamics with migration, its slow-fast limit and the trait substitution tree."""

__version__ = "0.1.0"
