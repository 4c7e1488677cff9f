"""
I/O, statistics and console utilities.
"""
