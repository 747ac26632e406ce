"""Numerical toolkit for quantum many-body simulation: exact diagonalization,
quantum Monte Carlo, DMRG, entanglement, gate-level simulation and cold-atom
estimates."""

__version__ = "0.1.0"
