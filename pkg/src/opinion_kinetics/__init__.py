"""Kinetic and Fokker-Planck models of continuous opinion formation."""

__version__ = "0.1.0"
