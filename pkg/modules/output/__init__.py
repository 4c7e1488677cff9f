"""
Report output: JSON documents and CSV tables.
"""
