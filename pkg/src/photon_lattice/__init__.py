"""Three-cavity, one-qubit photon lattice simulator."""

__version__ = "0.1.0"
