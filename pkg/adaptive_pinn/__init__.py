"""
Adaptive PINN toolkit

Small-data scientific machine learning for Nusselt-number regression: a
physics-informed network whose data and physics losses are blended by a
learnable sigmoid neuron, transfer learning between related heat-transfer
domains, and the kernel / hyperparameter-search / statistics harness used to
benchmark it.
"""

__version__ = "1.0.0"
__author__ = "Adaptive PINN Team"
