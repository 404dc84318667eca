"""Fault-tolerance laboratory for the 7-qubit code."""

__version__ = "0.1.0"
