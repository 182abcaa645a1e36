"""Low-rank quantum state tomography by Riemannian gradient descent."""
__version__ = "0.1.0"
