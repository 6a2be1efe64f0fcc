"""Exception types shared across the package."""


class LNPrivacyError(Exception):
    """Base class for all package errors."""


class SnapshotError(LNPrivacyError, ValueError):
    """A snapshot file or record does not conform to the schema."""


class DuplicateChannelError(SnapshotError):
    """Two channel records share one channel id."""


class ConfigError(LNPrivacyError, ValueError):
    """Invalid configuration value (unknown mode, empty distribution, ...)."""


class DistributionError(LNPrivacyError, ValueError):
    """A length distribution violates its invariants."""


class EmptyLogError(LNPrivacyError, ValueError):
    """An event log has no entries left after filtering."""


class DatasetError(LNPrivacyError, ValueError):
    """A transaction dataset is malformed or its spend links disagree."""
