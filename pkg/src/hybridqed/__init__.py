"""Circuit model of a transmon and a double-quantum-dot charge qubit coupled through
a tunable SQUID-array resonator, with spectra, reflection, dynamics and fits."""

__version__ = "0.1.0"
