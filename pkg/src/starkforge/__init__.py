"""High-precision limit formulas, theta lifts and Stark-unit checks for CM fields."""

__version__ = "0.1.0"
