"""Bayesian program induction over compositional lattice figures, with exemplar baselines."""

__version__ = "0.1.0"
