"""Simulated screen-to-camera covert channel: conceal, capture, reconstruct."""

__version__ = "0.1.0"
