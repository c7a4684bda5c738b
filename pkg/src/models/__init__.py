"""
Models module for BubbleFed
Transformer forecaster, flat weights and training
"""
