"""Topological frequency conversion in driven chiral molecules, resolved by enantiomer."""

__version__ = "0.1.0"
