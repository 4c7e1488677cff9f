"""
Loss components: SDPE offset constraints and the panorama-aware loss.
"""
