"""
Clustering module for BubbleFed
Importance distances, average-linkage dendrograms and Davies-Bouldin bubble selection
"""
