"""
Sphere and rotation geometry for equirectangular panoramas.
"""
