"""Exception types shared across the package."""


class ChipChainError(Exception):
    """Base class for every error raised by this package."""


class GeometryInvalid(ChipChainError):
    """Chip geometry parameters are out of range or inconsistent."""


class CapacityExceeded(ChipChainError):
    """More failure rows than the redundancy array can absorb."""


class ColumnOutOfRange(ChipChainError):
    """Column index outside the chip's column count."""


class PreprocessMissing(ChipChainError):
    """Read attempted before both preprocessing writes happened."""


class KExceedsN(ChipChainError):
    """Binomial coefficient requested with k > n."""


class UnknownGeneration(ChipChainError):
    """Capacity generation name not in the built-in ladder."""


class PrimeSearchExhausted(ChipChainError):
    """No prime found within the bounded search window."""


class SignatureMalformed(ChipChainError):
    """Signature has the wrong length for the verifying key."""


class StateMismatch(ChipChainError):
    """Operation used a security-state index the object was not bound to."""


class CycleDetected(ChipChainError):
    """Transfer topology contains a cycle."""


class MultipleSinks(ChipChainError):
    """Transfer topology has no unique final receiver."""


class UnknownChip(ChipChainError):
    """Referenced chip or node id is not part of the structure."""


class NonceExhausted(ChipChainError):
    """Proof-of-work search ran out of nonces below the attempt cap."""


class ConfigInvalid(ChipChainError):
    """Scenario configuration text failed validation."""
