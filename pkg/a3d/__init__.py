"""
A3D Action Recognition Toolkit
Decision-level two-stream fusion, visual attribute filtering/encoding and gated joint inference
"""

__version__ = "1.0.0"
