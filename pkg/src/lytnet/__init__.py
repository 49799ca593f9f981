"""Pedestrian traffic light and zebra crossing guidance pipeline.

A lightweight multi-task CNN (5-way light classification + crossing midline
regression), the bird's-eye homography and direction geometry, the five-frame
guidance state machine, training/evaluation harnesses, and a CLI.
"""

__version__ = "0.1.0"

from .tensor import ConvDescriptor, Tensor, conv_cost  # noqa: F401
