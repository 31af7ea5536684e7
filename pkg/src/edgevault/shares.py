"""Verifiable 2-of-2 splitting of byte secrets over a secret quasigroup.

A secret is encoded as base-n digits, masked digit-wise with fresh
randomness (share 1) and the left-division complement (share 2), so that
``multiply(r, share2) == secret digit`` reconstructs it.  Either share alone
is uniformly distributed per digit.  Shares travel sealed (AES-256-GCM) with
SHA-256 binding tags tied to a context identifier; combination re-verifies
everything: AEAD tags, binding tags, the quasigroup's own algebra, and a
whole-secret checksum.
"""

from __future__ import annotations

import functools
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .crypto import AeadRecord, aead_decrypt, aead_encrypt, sha256
from .errors import (
    AuthenticationFailure,
    AlgebraFailureError,
    ChecksumMismatchError,
    DecryptFailureError,
    EmptySecretError,
    InvalidOrderError,
    MalformedTableError,
    TagMismatchError,
    UnsupportedOrderError,
)
from .quasigroup import Quasigroup, generate_quasigroup, verify_parastroph_identities

__all__ = [
    "PlainShare",
    "SealedShare",
    "SplitRecord",
    "encode_secret",
    "decode_secret",
    "split",
    "seal_share",
    "unseal_share",
    "combine_and_verify",
]

CONTEXT_LEN = 32
COMBINE_SAMPLE_K = 64


def _digit_width(order: int) -> int:
    return int(math.floor(math.log2(order)))


def _digit_count(secret_len: int, order: int) -> int:
    width = _digit_width(order)
    count = -(-secret_len * 8 // width)  # ceil
    if (count * width) // 8 != secret_len:
        # Only reachable for order > 511: the count no longer determines the
        # byte length, so shares could not be parsed back unambiguously.
        raise UnsupportedOrderError(
            f"order {order} cannot encode {secret_len} bytes reversibly"
        )
    return count


def encode_secret(secret: bytes, order: int) -> np.ndarray:
    """Emit the secret as base-``order`` digits, most significant first.

    The digit count is fixed by the bit-packing rule
    ``ceil(len*8 / floor(log2 n))``; powers of two pack fixed-width bit
    groups directly, other orders go through big-integer base conversion.
    """
    if order < 2 or order > 0xFFFF:
        raise InvalidOrderError(f"order must be in [2, 65535], got {order}")
    if not secret:
        raise EmptySecretError("cannot encode an empty secret")
    count = _digit_count(len(secret), order)
    if order & (order - 1) == 0:
        data = np.frombuffer(secret, dtype=np.uint8)
        return kernels.pack_pow2(data, _digit_width(order), count)
    value = int.from_bytes(secret, "big")
    digits = np.zeros(count, dtype=np.uint16)
    i = count - 1
    while value:
        value, rem = divmod(value, order)
        digits[i] = rem
        i -= 1
    return digits


def decode_secret(digits: np.ndarray, order: int) -> bytes:
    """Inverse of encode_secret; the byte length is implied by the digit count."""
    if order < 2:
        raise InvalidOrderError(f"order must be >= 2, got {order}")
    digits = np.asarray(digits, dtype=np.uint16)
    n_bytes = (digits.shape[0] * _digit_width(order)) // 8
    if order & (order - 1) == 0:
        return kernels.unpack_pow2(digits, _digit_width(order), n_bytes).tobytes()
    value = 0
    for d in digits.tolist():
        value = value * order + d
    if value >> (8 * n_bytes):
        raise ValueError("digit string encodes a value wider than its byte length")
    return value.to_bytes(n_bytes, "big")


@dataclass
class PlainShare:
    """One of the two unencrypted shares: a digit sequence over [0, n)."""

    index: int  # 1 = edge, 2 = cloud
    order: int
    digits: np.ndarray
    secret_len_bytes: int

    def to_bytes(self) -> bytes:
        """Canonical form: index u8 ‖ order u16 BE ‖ digit count u32 BE ‖ digits u16 BE."""
        header = struct.pack(">BHI", self.index, self.order, self.digits.shape[0])
        return header + self.digits.astype(">u2").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PlainShare":
        if len(data) < 7:
            raise MalformedTableError("truncated share bytes")
        index, order, count = struct.unpack(">BHI", data[:7])
        body = data[7:]
        if index not in (1, 2) or order < 2 or len(body) != 2 * count:
            raise MalformedTableError("malformed canonical share bytes")
        digits = np.frombuffer(body, dtype=">u2").astype(np.uint16)
        if digits.size and int(digits.max()) >= order:
            raise MalformedTableError("share digit outside [0, order)")
        secret_len = (count * _digit_width(order)) // 8
        return cls(index=index, order=order, digits=digits, secret_len_bytes=secret_len)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PlainShare)
            and self.index == other.index
            and self.order == other.order
            and self.secret_len_bytes == other.secret_len_bytes
            and np.array_equal(self.digits, other.digits)
        )


def _binding_tag(share_bytes: bytes, index: int, context_id: bytes) -> bytes:
    return sha256(share_bytes + bytes([index]) + context_id)


@dataclass
class SealedShare:
    """An encrypted, authenticated share ready to leave the secure zone."""

    index: int
    record: AeadRecord
    binding_tag: bytes  # SHA-256 over canonical share bytes ‖ index ‖ context id

    def to_json_dict(self) -> dict:
        d = {"index": self.index, "binding_tag": self.binding_tag.hex()}
        d.update(self.record.to_json_dict())
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SealedShare":
        return cls(
            index=int(d["index"]),
            record=AeadRecord.from_json_dict(d),
            binding_tag=bytes.fromhex(d["binding_tag"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SealedShare":
        return cls.from_json_dict(json.loads(text))


@dataclass
class SplitRecord:
    """Edge-side verification record; never leaves the secure zone.

    Holds everything needed to rebuild the secret quasigroup and to verify a
    presented share pair: the (order, seed) generation parameters, the
    whole-secret checksum, and both expected binding tags.
    """

    context_id: bytes
    order: int
    qg_seed: int
    secret_checksum: bytes
    expected_tags: tuple[bytes, bytes]

    def to_state_dict(self) -> dict:
        return {
            "context_id": self.context_id.hex(),
            "order": self.order,
            "qg_seed": self.qg_seed,
            "secret_checksum": self.secret_checksum.hex(),
            "expected_tags": [t.hex() for t in self.expected_tags],
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "SplitRecord":
        return cls(
            context_id=bytes.fromhex(d["context_id"]),
            order=int(d["order"]),
            qg_seed=int(d["qg_seed"]),
            secret_checksum=bytes.fromhex(d["secret_checksum"]),
            expected_tags=tuple(bytes.fromhex(t) for t in d["expected_tags"]),
        )


def split(
    secret: bytes, q: Quasigroup, context_id: bytes, rng_seed: int
) -> tuple[PlainShare, PlainShare, SplitRecord]:
    """2-of-2 split of ``secret`` over the secret quasigroup ``q``.

    Per digit s: draw r uniform in [0, n); share 1 keeps r, share 2 keeps
    r \\ s, so r * (r \\ s) = s reconstructs.  ``q`` must carry its
    generation seed so the record can rebuild it inside the secure zone.
    """
    if not isinstance(q, Quasigroup):
        raise MalformedTableError("split requires a Quasigroup")
    if q.generation_seed is None:
        raise ValueError("quasigroup lacks (order, seed) rebuild parameters")
    if len(context_id) != CONTEXT_LEN:
        raise ValueError(f"context_id must be {CONTEXT_LEN} bytes")
    digits = encode_secret(secret, q.order)
    rng = np.random.default_rng(int(rng_seed) & 0xFFFFFFFFFFFFFFFF)
    r = rng.integers(0, q.order, size=digits.shape[0], dtype=np.uint16)
    complement = q.left_divide_many(r, digits)
    share1 = PlainShare(index=1, order=q.order, digits=r, secret_len_bytes=len(secret))
    share2 = PlainShare(index=2, order=q.order, digits=complement, secret_len_bytes=len(secret))
    record = SplitRecord(
        context_id=bytes(context_id),
        order=q.order,
        qg_seed=q.generation_seed,
        secret_checksum=sha256(secret),
        expected_tags=(
            _binding_tag(share1.to_bytes(), 1, context_id),
            _binding_tag(share2.to_bytes(), 2, context_id),
        ),
    )
    return share1, share2, record


def _share_ad(index: int, context_id: bytes) -> bytes:
    return bytes([index]) + context_id


def seal_share(share: PlainShare, key: bytes, context_id: bytes, nonces) -> SealedShare:
    """Encrypt a share under ``key`` and attach its context binding tag."""
    plain = share.to_bytes()
    record = aead_encrypt(key, plain, _share_ad(share.index, context_id), nonces)
    return SealedShare(
        index=share.index,
        record=record,
        binding_tag=_binding_tag(plain, share.index, context_id),
    )


def unseal_share(sealed: SealedShare, key: bytes, context_id: bytes) -> PlainShare:
    """Decrypt and parse a sealed share; raises AuthenticationFailure on tamper."""
    plain = aead_decrypt(key, sealed.record, _share_ad(sealed.index, context_id))
    return PlainShare.from_bytes(plain)


# Rebuilding is deterministic, so transaction-heavy flows can share one
# instance per (order, seed); Quasigroup is immutable after construction.
@functools.lru_cache(maxsize=64)
def _rebuild_quasigroup(order: int, seed: int) -> Quasigroup:
    return generate_quasigroup(order, seed)


def combine_and_verify(
    s1: SealedShare, s2: SealedShare, record: SplitRecord, key: bytes
) -> bytes:
    """Reconstruct the secret, verifying every layer on the way.

    In order: (1) authenticated decryption of both shares, (2) binding-tag
    comparison against the record, (3) algebraic verification of the rebuilt
    quasigroup (sampled identities, k=64, seeded from the table's canonical
    bytes and the context), (4) digit-wise reconstruction, (5) whole-secret
    checksum.  Each failure mode raises its own error type.
    """
    try:
        p1 = unseal_share(s1, key, record.context_id)
        p2 = unseal_share(s2, key, record.context_id)
    except (AuthenticationFailure, MalformedTableError) as exc:
        raise DecryptFailureError(f"share decryption failed: {exc}") from exc

    if p1.index != 1 or p2.index != 2:
        raise TagMismatchError("share indices do not form an (edge, cloud) pair")
    tags = (
        _binding_tag(p1.to_bytes(), 1, record.context_id),
        _binding_tag(p2.to_bytes(), 2, record.context_id),
    )
    if tags[0] != record.expected_tags[0] or tags[1] != record.expected_tags[1]:
        raise TagMismatchError("share binding tag mismatch (possible impersonation)")
    # the transported tags must match too, so every bit of a sealed share is
    # tamper-evident (index and record via AEAD, binding_tag here)
    if s1.binding_tag != tags[0] or s2.binding_tag != tags[1]:
        raise TagMismatchError("transported binding tag altered in flight")

    q = _rebuild_quasigroup(record.order, record.qg_seed)
    sample_seed = int.from_bytes(sha256(q.to_bytes() + record.context_id)[:8], "big")
    algebra = verify_parastroph_identities(q, mode="sampled", k=COMBINE_SAMPLE_K, seed=sample_seed)
    if not algebra.passed:
        raise AlgebraFailureError(f"quasigroup identity check failed: {algebra.failures[:3]}")

    if p1.order != q.order or p2.order != q.order or p1.digits.shape != p2.digits.shape:
        raise TagMismatchError("share parameters disagree with the split record")
    secret_digits = q.multiply_many(p1.digits, p2.digits)
    secret = decode_secret(secret_digits, q.order)

    if sha256(secret) != record.secret_checksum:
        raise ChecksumMismatchError("reconstructed secret fails its checksum")
    return secret
