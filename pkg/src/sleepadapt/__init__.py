"""Adaptive sleep/wake detection and daily sleep features from wearable signals."""

__version__ = "0.1.0"
