"""Monte Carlo model of a quantum ghost-imaging spectrometer and the
spectral-region discrimination tools used on its lambda-vs-y maps."""

__version__ = "0.1.0"
