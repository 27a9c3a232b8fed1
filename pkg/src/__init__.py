"""Generalized principal variables analysis - variable selection on mixed-type data"""

__version__ = "0.2.0"
