"""
Data module for BubbleFed
CSV ingestion, encoding, feature selection, region partitioning and synthetic clients
"""
