"""
SGA panorama geometry modules package.
"""

__version__ = "1.0.0"
