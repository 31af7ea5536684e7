"""Error taxonomy shared across the toolkit.

Every error carries a stable machine-readable ``code`` so the CLI can emit a
uniform error envelope and callers can dispatch without string matching.
"""


class EdgeVaultError(Exception):
    """Base class; ``code`` is stable across releases, the message is not."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__doc__ or self.code)


# --- quasigroup algebra ---

class InvalidOrderError(EdgeVaultError):
    code = "invalid-order"


class MalformedTableError(EdgeVaultError):
    code = "malformed-table"


class InvalidElementError(EdgeVaultError):
    code = "invalid-element"


# --- secret splitting / share verification ---

class EmptySecretError(EdgeVaultError):
    code = "empty-secret"


class UnsupportedOrderError(EdgeVaultError):
    code = "unsupported-order"


class EncryptionError(EdgeVaultError):
    code = "encryption-failure"


class ShareVerificationError(EdgeVaultError):
    """Base for the distinct combine-time failure modes."""

    code = "share-verification-failure"


class DecryptFailureError(ShareVerificationError):
    code = "decrypt-failure"


class TagMismatchError(ShareVerificationError):
    code = "tag-mismatch"


class AlgebraFailureError(ShareVerificationError):
    code = "algebra-failure"


class ChecksumMismatchError(ShareVerificationError):
    code = "checksum-mismatch"


# --- crypto core ---

class AuthenticationFailure(EdgeVaultError):
    code = "authentication-failure"


class ClockError(EdgeVaultError):
    code = "clock-error"


# --- elliptic-curve identity ---

class CurveError(EdgeVaultError):
    code = "invalid-curve"


class GroupFullError(EdgeVaultError):
    code = "group-full"


class DuplicateDeviceError(EdgeVaultError):
    code = "duplicate-device"


class RefuseSyncError(EdgeVaultError):
    code = "refuse-sync"


# --- key lifecycle ---

class UnknownKeyError(EdgeVaultError):
    code = "unknown-key"


class WrongPurposeError(EdgeVaultError):
    code = "wrong-purpose"


class AlreadySplitError(EdgeVaultError):
    code = "already-split"


class KeyStateError(EdgeVaultError):
    code = "key-state"


# --- data profiler ---

class TooFewSamplesError(EdgeVaultError):
    code = "too-few-samples"


class NonFiniteValuesError(EdgeVaultError):
    code = "non-finite-values"


class ZeroVarianceError(EdgeVaultError):
    code = "zero-variance"


class TooFewDistinctValuesError(EdgeVaultError):
    code = "too-few-distinct-values"


# --- access filter ---

class FilterParameterError(EdgeVaultError):
    code = "parameter-out-of-range"


# --- simulation ---

class ClassificationError(EdgeVaultError):
    code = "unclassified-record"


class ScenarioConfigError(EdgeVaultError):
    code = "config-error"


# --- CLI / state files ---

class StateError(EdgeVaultError):
    code = "corrupted-state"
