"""Sparse random hypergraph CSPs, local algorithms, shallow QAOA and concentration checks."""

from .instances import (
    CoupledPair,
    Hypergraph,
    SignedInstance,
    ball,
    brute_force_max,
    depth_budget,
    energy,
    overlap,
    sample_coupled,
    sample_hypergraph,
    sample_signs,
    signed_energy,
    xor_value,
)
from .rng import make_rng

__version__ = "0.1.0"
