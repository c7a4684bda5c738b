"""
Federation module for BubbleFed
FedAvg aggregation and per-bubble training orchestration
"""
