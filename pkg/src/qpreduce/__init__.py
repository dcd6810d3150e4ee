"""Coordinate-level toolkit for Lie bialgebroids, Courant doubles, Poisson
sprays and the classical sigma-model actions they feed."""

__version__ = "0.1.0"
