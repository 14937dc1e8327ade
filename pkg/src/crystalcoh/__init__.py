"""Desk-scale crystalline cohomology: divided-power envelopes, de Rham and
Cech-Alexander complexes over Z/p^e, and their comparison."""

__version__ = "0.1.0"
