"""Exception hierarchy shared across the package.

Anything raised on bad input data (malformed files, inconsistent traces,
out-of-range parameters) derives from :class:`DataError` so the CLI can map
it to a dedicated exit code, distinct from usage errors and genuine bugs.
"""

from __future__ import annotations


class SdSentinelError(Exception):
    """Base class for errors raised by this package."""


class DataError(SdSentinelError):
    """Input data is malformed, inconsistent, or unusable."""


class TraceFormatError(DataError):
    """A trace or label file violates its on-disk format."""


class CheckpointError(DataError):
    """A model checkpoint is corrupted or incompatible."""


class ConfigError(SdSentinelError):
    """A run configuration contains unknown keys or invalid values."""


class DegenerateInputError(DataError):
    """An operation received input it cannot meaningfully process."""
