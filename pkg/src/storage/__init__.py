"""
Storage module for BubbleFed
Run artifacts and manifests
"""
