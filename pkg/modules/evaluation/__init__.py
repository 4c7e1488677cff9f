"""
Segmentation metrics, predictors and the SGA validation protocol.
"""
