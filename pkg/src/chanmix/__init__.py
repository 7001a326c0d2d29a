"""chanmix: density-matrix simulation of convex combinations of quantum
channels, quasiprobability error cancellation with logical ancillas, and
damped-Rabi open-system evolution."""

from . import channels, circuit, lindblad, pec, qops

__version__ = "0.1.0"

__all__ = ["qops", "channels", "circuit", "pec", "lindblad", "__version__"]
