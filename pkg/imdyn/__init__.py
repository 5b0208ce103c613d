"""
Exact and floating-point analysis of piecewise monotone interval maps.
"""
import logging

__version__ = '0.1.0'

logging.getLogger(__name__).addHandler(logging.NullHandler())
