"""Two-side Robin-Robin domain decomposition for the grad-div problem."""

__version__ = "0.1.0"
