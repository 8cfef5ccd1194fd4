"""Pólya urns with immigration at renewal times and their limit laws."""

__version__ = "0.1.0"
