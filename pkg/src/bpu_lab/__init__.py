"""Numerical laboratory for level-k projections of half-weighted loop
distributions on the model sphere, and for the asymptotics of the induced
projective-space pullbacks."""

__version__ = "0.1.0"
