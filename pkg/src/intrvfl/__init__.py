"""intRVFL hidden layers with GLVQ / ridge / centroid readouts."""

__version__ = "0.1.0"
