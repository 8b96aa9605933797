"""power-ch - Power consistent hashing with verification and benchmark tools."""

__version__ = "0.1.0"
