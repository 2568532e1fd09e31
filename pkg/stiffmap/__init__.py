"""Simplicial map untangling and quasi-isometric stiffening."""
__version__ = "1.0.0"
