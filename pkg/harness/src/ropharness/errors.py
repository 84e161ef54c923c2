"""Harness errors."""


class HarnessError(Exception):
    """Base class for harness errors."""


class UnknownBackbone(HarnessError):
    """Backbone name not in the supported set."""


class PairingViolation(HarnessError):
    """Train and validation directories were not produced by the same method."""


class EmptyClass(HarnessError):
    """A class expected by the task has no training images."""
