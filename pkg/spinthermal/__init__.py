"""spinthermal - thermal entanglement of two spins, alone and inside disordered XXZ chains."""

from spinthermal.version import __version__

__all__ = ["__version__"]
