"""Multi-frequency convexification for the 3D Helmholtz coefficient inverse problem."""

__version__ = "0.1.0"
