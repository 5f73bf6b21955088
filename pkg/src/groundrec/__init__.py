"""groundrec: grounding and evaluation engine for generative recommendation."""

__version__ = "0.1.0"
