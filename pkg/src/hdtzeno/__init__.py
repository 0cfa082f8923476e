"""Spin-chain simulator for repeated evolve, measure and reset cycles, with frame-potential estimators and closed-form decay and freezing bounds."""

__version__ = "0.1.0"
