"""
ERP rasters, spherical rotation and augmentation.
"""
