"""
Boosting module for BubbleFed
Gradient-boosted trees, gain importance and leave-one-out sensitivity
"""
