"""
BubbleFed: privacy-adaptive clustered federated learning for regional demand forecasting
Source package initialization
"""

__version__ = "1.0.0"
__author__ = "BubbleFed Team"
__description__ = "Privacy-adaptive clustered federated learning for regional demand forecasting"
