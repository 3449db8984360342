"""Harmonic analysis on toric Kahler varieties."""
