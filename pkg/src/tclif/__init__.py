"""Two-compartment spiking networks with online (e-prop) and offline (BPTT)
training, in plain numpy."""

__version__ = "0.1.0"
