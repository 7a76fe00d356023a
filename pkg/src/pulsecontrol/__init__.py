"""Pulse-controlled suppression of qubit decoherence: simulation and perturbative analysis."""

__version__ = "0.1.0"
