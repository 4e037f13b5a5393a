"""Coverage path planning for 3D inspection of triangle-mesh targets."""

__version__ = "0.1.0"
