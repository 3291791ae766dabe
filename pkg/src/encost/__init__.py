"""Encoding time and energy cost modeling for SVT-AV1 from video content descriptors."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
