"""Primitive contracts shared by every module: SHA-256, AES-256-GCM records,
deterministic nonce sequences, and monotonic timestamp issuance/verification.

All byte layouts here are frozen; they feed hash chains and must stay
bit-identical across platforms.
"""

from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass
from typing import Callable, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthenticationFailure, ClockError, EncryptionError

__all__ = [
    "sha256",
    "derive_seed",
    "AeadRecord",
    "NonceSequence",
    "aead_encrypt",
    "aead_decrypt",
    "Timestamp",
    "TimestampAuthority",
    "TsaView",
    "verify_freshness",
]

NONCE_LEN = 12
TAG_LEN = 16
KEY_LEN = 32


def sha256(data: bytes) -> bytes:
    """32-byte SHA-256 digest."""
    return hashlib.sha256(data).digest()


def derive_seed(seed, label: bytes) -> int:
    """Deterministic, platform-independent child seed (64-bit)."""
    return int.from_bytes(sha256(b"edgevault.seed" + _seed_to_bytes(seed) + label)[:8], "big")


def _seed_to_bytes(seed) -> bytes:
    if isinstance(seed, bytes):
        return seed
    return int(seed).to_bytes(8, "big", signed=False)


class NonceSequence:
    """Deterministic 96-bit nonce stream: 4-byte stream tag ‖ 8-byte BE counter.

    One sequence per key; the caller must not reuse a (key, sequence) pair.
    The counter state is serializable so CLI state files can resume safely.
    """

    __slots__ = ("tag", "counter")

    def __init__(self, seed, counter: int = 0):
        self.tag = sha256(b"edgevault.nonce" + _seed_to_bytes(seed))[:4]
        self.counter = counter

    def next_nonce(self) -> bytes:
        nonce = self.tag + struct.pack(">Q", self.counter)
        self.counter += 1
        return nonce


@dataclass(frozen=True)
class AeadRecord:
    """An AES-256-GCM record: 12-byte nonce, ciphertext, 16-byte tag."""

    nonce: bytes
    ciphertext: bytes
    tag: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_LEN or len(self.tag) != TAG_LEN:
            raise EncryptionError("malformed AEAD record field lengths")

    def to_bytes(self) -> bytes:
        """Binary form: nonce ‖ ciphertext ‖ tag."""
        return self.nonce + self.ciphertext + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "AeadRecord":
        if len(data) < NONCE_LEN + TAG_LEN:
            raise EncryptionError("AEAD record too short")
        return cls(data[:NONCE_LEN], data[NONCE_LEN:-TAG_LEN], data[-TAG_LEN:])

    def to_json_dict(self) -> dict:
        return {
            "nonce": self.nonce.hex(),
            "ciphertext": self.ciphertext.hex(),
            "tag": self.tag.hex(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AeadRecord":
        return cls(
            bytes.fromhex(d["nonce"]),
            bytes.fromhex(d["ciphertext"]),
            bytes.fromhex(d["tag"]),
        )


def aead_encrypt(key: bytes, plaintext: bytes, associated_data: bytes, nonces) -> AeadRecord:
    """AES-256-GCM encryption.

    ``nonces`` is a NonceSequence (advanced by one) or an integer seed for a
    one-shot sequence; with an integer, the caller is responsible for never
    repeating a (key, seed) pair.
    """
    if len(key) != KEY_LEN:
        raise EncryptionError(f"key must be {KEY_LEN} bytes, got {len(key)}")
    if not isinstance(nonces, NonceSequence):
        nonces = NonceSequence(nonces)
    nonce = nonces.next_nonce()
    blob = AESGCM(key).encrypt(nonce, plaintext, associated_data)
    return AeadRecord(nonce=nonce, ciphertext=blob[:-TAG_LEN], tag=blob[-TAG_LEN:])


def aead_decrypt(key: bytes, record: AeadRecord, associated_data: bytes) -> bytes:
    """Authenticated decryption; any bit flip in the record or AD fails."""
    if len(key) != KEY_LEN:
        raise EncryptionError(f"key must be {KEY_LEN} bytes, got {len(key)}")
    try:
        return AESGCM(key).decrypt(record.nonce, record.ciphertext + record.tag, associated_data)
    except InvalidTag as exc:
        raise AuthenticationFailure("AEAD authentication failed") from exc


# ---------------------------------------------------------------------------
# Timestamps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Timestamp:
    """A TSA-issued timestamp; ``sequence`` is strictly monotonic per issuer."""

    epoch_seconds: int
    issuer: str
    sequence: int

    def to_bytes(self) -> bytes:
        """Frozen hash form: 8-byte BE epoch_seconds ‖ 8-byte BE sequence."""
        return struct.pack(">QQ", self.epoch_seconds, self.sequence)

    def to_json_dict(self) -> dict:
        return {
            "epoch_seconds": self.epoch_seconds,
            "issuer": self.issuer,
            "sequence": self.sequence,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Timestamp":
        return cls(int(d["epoch_seconds"]), str(d.get("issuer", "")), int(d["sequence"]))


@dataclass(frozen=True)
class TsaView:
    """What a remote party (the cloud) knows about a TSA: its identity and
    the highest sequence number issued so far."""

    issuer: str
    last_sequence: int


class TimestampAuthority:
    """Monotonic timestamp issuer.

    ``clock`` returns integer seconds; it defaults to wall time, and the
    simulator passes a logical tick counter instead.  Callers must serialize
    ``issue`` per instance (single-writer contract).
    """

    def __init__(
        self,
        issuer: str = "tsa",
        clock: Optional[Callable[[], int]] = None,
        start_sequence: int = 0,
    ):
        self.issuer = issuer
        self._clock = clock if clock is not None else (lambda: int(time.time()))
        self._sequence = start_sequence
        self._last_epoch = 0

    def issue(self, for_context: bytes = b"") -> Timestamp:
        now = int(self._clock())
        if now < self._last_epoch:
            raise ClockError(f"clock regressed: {now} < {self._last_epoch}")
        self._last_epoch = now
        self._sequence += 1
        return Timestamp(epoch_seconds=now, issuer=self.issuer, sequence=self._sequence)

    @property
    def view(self) -> TsaView:
        return TsaView(issuer=self.issuer, last_sequence=self._sequence)

    def state_dict(self) -> dict:
        return {"issuer": self.issuer, "sequence": self._sequence, "last_epoch": self._last_epoch}

    @classmethod
    def from_state_dict(cls, d: dict, clock: Optional[Callable[[], int]] = None):
        tsa = cls(issuer=d["issuer"], clock=clock, start_sequence=int(d["sequence"]))
        tsa._last_epoch = int(d["last_epoch"])
        return tsa


def verify_freshness(
    tsa_view: TsaView, ts: Timestamp, last_seen: Optional[Timestamp] = None
) -> bool:
    """Replay check against the TSA view and the last timestamp accepted.

    Rejects timestamps that the TSA never issued (wrong issuer or a sequence
    beyond its counter) and any sequence at or below ``last_seen`` (replay).
    First-ever timestamps (``last_seen is None``) are fresh.
    """
    if ts.issuer != tsa_view.issuer or ts.sequence > tsa_view.last_sequence:
        return False
    if last_seen is not None and ts.sequence <= last_seen.sequence:
        return False
    return ts.sequence > 0
