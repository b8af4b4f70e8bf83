"""Pseudo-spectral solver and diagnostics for Navier-Stokes-type systems with general bilinear nonlinearities."""

__version__ = "0.1.0"
