"""
Scripts for the adaptive PINN toolkit.
"""
