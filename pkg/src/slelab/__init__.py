"""Lattice walks, loop-erased walks, uniform spanning trees and Loewner chains."""

__version__ = "0.1.0"
