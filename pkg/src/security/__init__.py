"""
Security module for BubbleFed
Laplace mechanism for private importance release
"""
