"""Spectral theory of the linearized Vlasov-Poisson system near radial equilibria."""

__version__ = "0.1.0"
