"""Matter-wave interferometry simulation toolkit."""
__version__ = "0.1.0"
