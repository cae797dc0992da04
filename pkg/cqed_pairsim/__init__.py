"""Two longitudinally coupled qubits and one resonator: spectra, sweeps and driven dynamics."""

__version__ = "0.1.0"
