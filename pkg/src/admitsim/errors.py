"""Error taxonomy shared by the library and the CLI.

Parameter problems (bad values, inconsistent configuration, malformed input
files) and resource problems (state spaces or enumerations above a configured
cap) are kept distinct so the CLI can map them to different exit codes.
"""

from __future__ import annotations


class ParameterError(ValueError):
    """Invalid or inconsistent user-supplied parameters or input data."""


class ResourceError(RuntimeError):
    """A requested computation exceeds a configured size or memory cap."""
