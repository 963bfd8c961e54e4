"""pfnn - Potential Fredholm neural networks for elliptic PDEs on the unit disc."""

__version__ = "0.1.0"
