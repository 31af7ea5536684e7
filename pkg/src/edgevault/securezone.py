"""Software emulation of the edge HSM secure zone.

The zone is an API boundary, not hardware: raw key bytes and split records
live only in its private tables, every mutating call is audit-logged, and
everything that leaves the zone is either an identifier, a sealed record, or
a snapshot with the secrets stripped.  The zone also hosts the identity
ledger so sealed points and the used-point registry stay inside the
boundary.

State files written by :meth:`SecureZone.save` emulate the HSM's internal
tamper-proof storage; they are not exported artifacts and must be treated as
inside the boundary.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

from .crypto import (
    NonceSequence,
    Timestamp,
    TimestampAuthority,
    aead_decrypt,
    aead_encrypt,
    derive_seed,
    sha256,
    verify_freshness,
    AeadRecord,
)
from .errors import (
    AlgebraFailureError,
    AlreadySplitError,
    ChecksumMismatchError,
    DecryptFailureError,
    KeyStateError,
    TagMismatchError,
    UnknownKeyError,
    WrongPurposeError,
)
from .ledger import IdentityLedger, LedgerEntry
from .quasigroup import generate_quasigroup
from .shares import SealedShare, SplitRecord, combine_and_verify, seal_share, split

__all__ = ["ManagedKey", "Decision", "DistributionResult", "SecureZone", "DEFAULT_BUDGET"]

DEFAULT_BUDGET = 2 ** 16

PURPOSES = ("data-encryption", "key-encryption", "point-sealing")
STATES = ("generated", "split", "distributed", "retired")


@dataclass
class ManagedKey:
    """Metadata for one key in the zone; raw bytes live in the zone table."""

    key_id: bytes  # 16 bytes
    purpose: str
    state: str
    usage_budget: int
    uses: int
    created_at: Timestamp

    def to_public_dict(self) -> dict:
        return {
            "key_id": self.key_id.hex(),
            "purpose": self.purpose,
            "state": self.state,
            "usage_budget": self.usage_budget,
            "uses": self.uses,
            "created_at": self.created_at.to_json_dict(),
        }


@dataclass(frozen=True)
class Decision:
    """Outcome of a transaction authorization."""

    accepted: bool
    reason: Optional[str] = None  # replay | tag-mismatch | decrypt-failure |
    #                               algebra-failure | checksum-mismatch | budget-exhausted


@dataclass(frozen=True)
class DistributionResult:
    edge_share: SealedShare
    cloud_share: SealedShare


_FORWARD = {s: i for i, s in enumerate(STATES)}


class SecureZone:
    """Single-writer key vault plus transaction verifier.

    All randomness is caller-seeded, so a zone replayed from the same seeds
    reproduces the same identifiers and records (test mode is just fixed
    seeds).  The usage budget counts authorized transactions per key; once
    exhausted the key must be retired and regenerated.
    """

    def __init__(self, zone_seed: int, tsa: TimestampAuthority):
        self._tsa = tsa
        self._zone_seed = int(zone_seed)
        self._keys: dict[bytes, ManagedKey] = {}
        self._key_bytes: dict[bytes, bytes] = {}
        self._nonces: dict[bytes, NonceSequence] = {}
        self._split_records: dict[bytes, SplitRecord] = {}
        self._edge_shares: dict[bytes, SealedShare] = {}
        self._context_keys: dict[bytes, bytes] = {}
        self._last_seen: dict[bytes, Timestamp] = {}
        self._audit: list[dict] = []
        self._op_counter = 0
        self.ledger: Optional[IdentityLedger] = None
        # infrastructure keys: one KEK and one share-sealing key per zone
        self._kek_id = self.generate_key("key-encryption", rng_seed=derive_seed(zone_seed, b"kek"))
        self._share_key_id = self.generate_key(
            "data-encryption", rng_seed=derive_seed(zone_seed, b"sharekey")
        )
        self._point_key_id = self.generate_key(
            "point-sealing", rng_seed=derive_seed(zone_seed, b"pointkey")
        )

    # --- audit -----------------------------------------------------------

    def _log(self, op: str, outcome: str, key_id: Optional[bytes] = None,
             context_id: Optional[bytes] = None, reason: Optional[str] = None):
        entry = {
            "sequence": len(self._audit),
            "op": op,
            "key_id": key_id.hex() if key_id else None,
            "context_id_hex": context_id.hex() if context_id else None,
            "outcome": outcome,
        }
        if reason:
            entry["reason"] = reason
        self._audit.append(entry)

    @property
    def audit_log(self) -> tuple[dict, ...]:
        return tuple(self._audit)

    def export_audit_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self._audit)

    # --- key lifecycle ----------------------------------------------------

    def _require_key(self, key_id: bytes) -> ManagedKey:
        key = self._keys.get(key_id)
        if key is None:
            raise UnknownKeyError(f"no key {key_id.hex()}")
        return key

    def _advance_state(self, key: ManagedKey, new_state: str):
        if _FORWARD[new_state] < _FORWARD[key.state]:
            raise KeyStateError(f"cannot move key {key.key_id.hex()} {key.state} -> {new_state}")
        key.state = new_state

    def generate_key(self, purpose: str, budget: int = DEFAULT_BUDGET,
                     rng_seed: int = 0) -> bytes:
        """Create a 32-byte key inside the zone; only the key id leaves."""
        if purpose not in PURPOSES:
            raise WrongPurposeError(f"unknown purpose {purpose!r}")
        material = sha256(
            b"edgevault.keymat"
            + int(rng_seed).to_bytes(8, "big", signed=False)
            + self._op_counter.to_bytes(8, "big")
            + purpose.encode()
        )
        self._op_counter += 1
        key_id = sha256(b"edgevault.keyid" + material)[:16]
        self._keys[key_id] = ManagedKey(
            key_id=key_id,
            purpose=purpose,
            state="generated",
            usage_budget=budget,
            uses=0,
            created_at=self._tsa.issue(for_context=key_id),
        )
        self._key_bytes[key_id] = material
        self._nonces[key_id] = NonceSequence(key_id)
        self._log("generate_key", "ok", key_id=key_id)
        return key_id

    def retire_key(self, key_id: bytes):
        key = self._require_key(key_id)
        self._advance_state(key, "retired")
        self._log("retire_key", "ok", key_id=key_id)

    def wrap_key(self, kek_id: bytes, target_id: bytes) -> AeadRecord:
        """Encrypt the target key under a key-encryption key."""
        kek = self._require_key(kek_id)
        target = self._require_key(target_id)
        if kek.purpose != "key-encryption":
            raise WrongPurposeError(f"key {kek_id.hex()} is {kek.purpose}, not key-encryption")
        record = aead_encrypt(
            self._key_bytes[kek_id],
            self._key_bytes[target.key_id],
            b"wrap" + target_id,
            self._nonces[kek_id],
        )
        self._log("wrap_key", "ok", key_id=target_id)
        return record

    def _unwrap_key(self, kek_id: bytes, target_id: bytes, record: AeadRecord) -> bytes:
        return aead_decrypt(self._key_bytes[kek_id], record, b"wrap" + target_id)

    def verify_wrapped(self, kek_id: bytes, target_id: bytes, record: AeadRecord) -> bool:
        """Check (inside the zone) that a wrap record restores the target key."""
        try:
            restored = self._unwrap_key(kek_id, target_id, record)
        except Exception:
            return False
        return sha256(restored) == sha256(self._key_bytes[self._require_key(target_id).key_id])

    # --- splitting and distribution ----------------------------------------

    def split_and_distribute(
        self, key_id: bytes, context_id: bytes, q_order: int = 256, rng_seed: int = 0
    ) -> DistributionResult:
        """Wrap the key, 2-of-2 split the wrapped bytes, seal both shares.

        Share 1 stays in the zone (edge), share 2 is returned for transfer
        to the cloud; the split record never leaves.
        """
        key = self._require_key(key_id)
        if key.state != "generated":
            raise AlreadySplitError(f"key {key_id.hex()} is already {key.state}")
        if context_id in self._split_records:
            raise AlreadySplitError(f"context {context_id.hex()} already has a distribution")

        wrapped = self.wrap_key(self._kek_id, key_id).to_bytes()
        q = generate_quasigroup(q_order, derive_seed(rng_seed, b"qg" + context_id))
        share1, share2, record = split(
            wrapped, q, context_id, derive_seed(rng_seed, b"mask" + context_id)
        )
        self._advance_state(key, "split")

        share_key = self._key_bytes[self._share_key_id]
        nonces = self._nonces[self._share_key_id]
        sealed1 = seal_share(share1, share_key, context_id, nonces)
        sealed2 = seal_share(share2, share_key, context_id, nonces)

        self._split_records[context_id] = record
        self._edge_shares[context_id] = sealed1
        self._context_keys[context_id] = key_id
        self._advance_state(key, "distributed")
        self._log("split_and_distribute", "ok", key_id=key_id, context_id=context_id)
        return DistributionResult(edge_share=sealed1, cloud_share=sealed2)

    def edge_share_for(self, context_id: bytes) -> SealedShare:
        if context_id not in self._edge_shares:
            raise UnknownKeyError(f"no distribution for context {context_id.hex()}")
        return self._edge_shares[context_id]

    # --- transaction authorization ------------------------------------------

    def authorize_transaction(
        self, context_id: bytes, presented_cloud_share: SealedShare, ts: Timestamp
    ) -> Decision:
        """Verify a cloud-initiated transaction end to end.

        Checks, in order: timestamp freshness against the TSA view and the
        last accepted timestamp for this context, the key's usage budget,
        then the full share combination (AEAD, binding tags, quasigroup
        algebra, checksum).  Every call is audit-logged.
        """
        record = self._split_records.get(context_id)
        if record is None:
            self._log("authorize_transaction", "error", context_id=context_id,
                      reason="unknown-context")
            raise UnknownKeyError(f"no split record for context {context_id.hex()}")

        def reject(reason: str) -> Decision:
            self._log("authorize_transaction", "rejected", key_id=key_id,
                      context_id=context_id, reason=reason)
            return Decision(accepted=False, reason=reason)

        key_id = self._context_keys[context_id]
        key = self._keys[key_id]

        if not verify_freshness(self._tsa.view, ts, self._last_seen.get(context_id)):
            return reject("replay")
        if key.uses >= key.usage_budget:
            return reject("budget-exhausted")

        try:
            wrapped = combine_and_verify(
                self._edge_shares[context_id],
                presented_cloud_share,
                record,
                self._key_bytes[self._share_key_id],
            )
        except DecryptFailureError:
            return reject("decrypt-failure")
        except TagMismatchError:
            return reject("tag-mismatch")
        except AlgebraFailureError:
            return reject("algebra-failure")
        except ChecksumMismatchError:
            return reject("checksum-mismatch")

        # Deep check: the reconstructed wrap record must restore the stored key.
        if not self.verify_wrapped(self._kek_id, key_id, AeadRecord.from_bytes(wrapped)):
            return reject("checksum-mismatch")

        key.uses += 1
        self._last_seen[context_id] = ts
        self._log("authorize_transaction", "accepted", key_id=key_id, context_id=context_id)
        return Decision(accepted=True)

    # --- hosted identity ledger ----------------------------------------------

    def attach_ledger(self, ledger: IdentityLedger):
        self.ledger = ledger

    def register_device(self, device_label: str, rng_seed: int) -> LedgerEntry:
        """Register a device on the hosted ledger with the zone's point key."""
        if self.ledger is None:
            raise KeyStateError("no ledger attached to this zone")
        entry = self.ledger.register_device(
            device_label, self._tsa, self._key_bytes[self._point_key_id], rng_seed
        )
        self._log("register_device", "ok", key_id=self._point_key_id,
                  context_id=entry.h2)
        return entry

    # --- exports and persistence ----------------------------------------------

    def public_state(self) -> dict:
        """Exportable view: identifiers and metadata only, never secrets."""
        return {
            "keys": [k.to_public_dict() for k in self._keys.values()],
            "contexts": sorted(c.hex() for c in self._split_records),
            "audit_length": len(self._audit),
        }

    def state_dict(self) -> dict:
        """Full internal state for zone-internal persistence (see module doc)."""
        return {
            "zone_seed": self._zone_seed,
            "op_counter": self._op_counter,
            "kek_id": self._kek_id.hex(),
            "share_key_id": self._share_key_id.hex(),
            "point_key_id": self._point_key_id.hex(),
            "keys": [
                {**k.to_public_dict(), "material": self._key_bytes[kid].hex(),
                 "nonce_counter": self._nonces[kid].counter}
                for kid, k in self._keys.items()
            ],
            "split_records": [r.to_state_dict() for r in self._split_records.values()],
            "edge_shares": {c.hex(): s.to_json_dict() for c, s in self._edge_shares.items()},
            "context_keys": {c.hex(): k.hex() for c, k in self._context_keys.items()},
            "last_seen": {c.hex(): t.to_json_dict() for c, t in self._last_seen.items()},
            "audit": self._audit,
        }

    @classmethod
    def from_state_dict(cls, d: dict, tsa: TimestampAuthority) -> "SecureZone":
        zone = cls.__new__(cls)
        zone._tsa = tsa
        zone._zone_seed = int(d["zone_seed"])
        zone._op_counter = int(d["op_counter"])
        zone._kek_id = bytes.fromhex(d["kek_id"])
        zone._share_key_id = bytes.fromhex(d["share_key_id"])
        zone._point_key_id = bytes.fromhex(d["point_key_id"])
        zone._keys = {}
        zone._key_bytes = {}
        zone._nonces = {}
        for kd in d["keys"]:
            kid = bytes.fromhex(kd["key_id"])
            zone._keys[kid] = ManagedKey(
                key_id=kid,
                purpose=kd["purpose"],
                state=kd["state"],
                usage_budget=int(kd["usage_budget"]),
                uses=int(kd["uses"]),
                created_at=Timestamp.from_json_dict(kd["created_at"]),
            )
            zone._key_bytes[kid] = bytes.fromhex(kd["material"])
            seq = NonceSequence(kid, counter=int(kd["nonce_counter"]))
            zone._nonces[kid] = seq
        zone._split_records = {
            bytes.fromhex(rd["context_id"]): SplitRecord.from_state_dict(rd)
            for rd in d["split_records"]
        }
        zone._edge_shares = {
            bytes.fromhex(c): SealedShare.from_json_dict(s)
            for c, s in d["edge_shares"].items()
        }
        zone._context_keys = {
            bytes.fromhex(c): bytes.fromhex(k) for c, k in d["context_keys"].items()
        }
        zone._last_seen = {
            bytes.fromhex(c): Timestamp.from_json_dict(t) for c, t in d["last_seen"].items()
        }
        zone._audit = list(d["audit"])
        zone.ledger = None
        return zone

    def save(self, path: str):
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(self.state_dict(), fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str, tsa: TimestampAuthority) -> "SecureZone":
        with open(path) as fh:
            return cls.from_state_dict(json.load(fh), tsa)
