#!/usr/bin/env python3
"""
BubbleFed: privacy-adaptive clustered federated learning for regional demand forecasting
Main application entry point
"""

import sys
from pathlib import Path

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.core.cli import main


if __name__ == "__main__":
    main()
