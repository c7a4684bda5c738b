"""
Core module for BubbleFed
Configuration, exceptions, seeding, the experiment runner and the CLI
"""
