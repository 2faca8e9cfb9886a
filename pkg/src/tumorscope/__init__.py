"""Brain MRI tumor detection and segmentation toolkit."""

__version__ = "0.1.0"
