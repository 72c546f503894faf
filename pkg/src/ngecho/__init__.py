"""Monte Carlo and closed-form tools for fourth-order magnetic noise cumulants
probed by one- and two-qubit echo sequences."""

__version__ = "0.1.0"
