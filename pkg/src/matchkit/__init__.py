"""Matching and allocation mechanism toolkit with an axiom-verification
harness: housing allocation, school choice, matching with contracts,
reserve systems, and kidney-exchange clearing."""

__version__ = "0.1.0"
