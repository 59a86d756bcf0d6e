"""ALGAS2: quad-core fuzzy landing guidance simulator."""

__version__ = "1.0.0"
