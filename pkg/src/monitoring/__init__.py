"""
Monitoring module for BubbleFed
Logging, evaluation metrics and comparison reports
"""
