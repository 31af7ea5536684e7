"""Hash-chained device identity ledger.

Each registration selects a unique curve point, seals it (the sealed point is
never decrypted again), and chains two digests:

    h1 = SHA-256(sealed point bytes ‖ timestamp bytes)
    h2 = h1                       for the first entry
    h2 = SHA-256(prev h2 ‖ h1)    afterwards

h2 is the device's unique ID.  The chain is append-only; verification
recomputes every digest from the raw records and reports the earliest
mismatch.  Snapshots carry entries only, never key material or plaintext
points, so the cloud replica can verify but not mint identities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .crypto import AeadRecord, NonceSequence, Timestamp, TimestampAuthority, aead_encrypt, sha256
from .curves import WeierstrassCurve, point_to_bytes, select_unique_point
from .errors import DuplicateDeviceError, RefuseSyncError, StateError

__all__ = ["LedgerEntry", "ChainReport", "IdentityLedger"]


@dataclass(frozen=True)
class LedgerEntry:
    device_label: str
    ciphertext_record: AeadRecord
    timestamp: Timestamp
    h1: bytes
    h2: bytes

    def hashed_bytes(self) -> bytes:
        """The exact h1 preimage: sealed point record ‖ timestamp bytes."""
        return self.ciphertext_record.to_bytes() + self.timestamp.to_bytes()

    def to_json_dict(self, index: int) -> dict:
        return {
            "index": index,
            "device_label": self.device_label,
            "nonce_hex": self.ciphertext_record.nonce.hex(),
            "ciphertext_hex": self.ciphertext_record.ciphertext.hex(),
            "tag_hex": self.ciphertext_record.tag.hex(),
            "epoch_seconds": self.timestamp.epoch_seconds,
            "sequence": self.timestamp.sequence,
            "h1_hex": self.h1.hex(),
            "h2_hex": self.h2.hex(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LedgerEntry":
        return cls(
            device_label=str(d["device_label"]),
            ciphertext_record=AeadRecord(
                nonce=bytes.fromhex(d["nonce_hex"]),
                ciphertext=bytes.fromhex(d["ciphertext_hex"]),
                tag=bytes.fromhex(d["tag_hex"]),
            ),
            timestamp=Timestamp(
                epoch_seconds=int(d["epoch_seconds"]),
                issuer=str(d.get("issuer", "")),
                sequence=int(d["sequence"]),
            ),
            h1=bytes.fromhex(d["h1_hex"]),
            h2=bytes.fromhex(d["h2_hex"]),
        )


@dataclass
class ChainReport:
    valid: bool
    first_bad_index: Optional[int] = None

    def __bool__(self) -> bool:
        return self.valid


def _chain_digests(prev_h2: Optional[bytes], record: AeadRecord, ts: Timestamp) -> tuple[bytes, bytes]:
    h1 = sha256(record.to_bytes() + ts.to_bytes())
    h2 = h1 if prev_h2 is None else sha256(prev_h2 + h1)
    return h1, h2


class IdentityLedger:
    """Append-only hash chain of device identities for one group.

    Single-writer; ``used_points`` enforces point uniqueness within the
    group and stays inside the edge secure zone (it never enters snapshots).
    """

    def __init__(self, group_id: str, curve: WeierstrassCurve):
        self.group_id = group_id
        self.curve = curve
        self.entries: list[LedgerEntry] = []
        self.used_points: set[tuple[int, int]] = set()
        self._labels: set[str] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def register_device(
        self,
        device_label: str,
        tsa: TimestampAuthority,
        point_key: bytes,
        rng_seed: int,
    ) -> LedgerEntry:
        """Select a unique point, seal it, chain the digests, append.

        The sealed point is write-only identity material; nothing ever
        decrypts it again.  Nonces are derived from (group, label, seed);
        labels are unique per group, which keeps nonces unique per key.
        """
        if device_label in self._labels:
            raise DuplicateDeviceError(f"device {device_label!r} already registered")
        point = select_unique_point(self.curve, self.used_points, rng_seed)
        nonce_seed = sha256(
            b"edgevault.point" + self.group_id.encode() + device_label.encode()
            + int(rng_seed).to_bytes(8, "big", signed=False)
        )
        record = aead_encrypt(
            point_key,
            point_to_bytes(self.curve, point),
            b"point" + device_label.encode(),
            NonceSequence(nonce_seed),
        )
        ts = tsa.issue(for_context=device_label.encode())
        prev_h2 = self.entries[-1].h2 if self.entries else None
        h1, h2 = _chain_digests(prev_h2, record, ts)
        entry = LedgerEntry(
            device_label=device_label,
            ciphertext_record=record,
            timestamp=ts,
            h1=h1,
            h2=h2,
        )
        self.entries.append(entry)
        self.used_points.add(point.as_tuple())
        self._labels.add(device_label)
        return entry

    def verify_chain(self) -> ChainReport:
        """Recompute h1/h2 for every entry; report the earliest mismatch."""
        prev_h2: Optional[bytes] = None
        for i, entry in enumerate(self.entries):
            h1, h2 = _chain_digests(prev_h2, entry.ciphertext_record, entry.timestamp)
            if h1 != entry.h1 or h2 != entry.h2:
                return ChainReport(valid=False, first_bad_index=i)
            prev_h2 = h2
        return ChainReport(valid=True)

    # --- snapshots -------------------------------------------------------

    def sync_to_cloud(self) -> bytes:
        """Serialized snapshot for the cloud replica (entries only, no keys).

        Refuses to sync a chain that does not verify.
        """
        report = self.verify_chain()
        if not report.valid:
            raise RefuseSyncError(f"chain invalid at index {report.first_bad_index}")
        header = {
            "group_id": self.group_id,
            "entry_count": len(self.entries),
            **self.curve.to_json_dict(),
        }
        lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
        lines += [
            json.dumps(e.to_json_dict(i), sort_keys=True, separators=(",", ":"))
            for i, e in enumerate(self.entries)
        ]
        return ("\n".join(lines) + "\n").encode()

    @classmethod
    def import_snapshot(cls, data: bytes) -> "IdentityLedger":
        """Rebuild a replica from a snapshot; it can verify but not register.

        Imported timestamps carry an empty issuer (the snapshot's frozen hash
        form covers epoch and sequence only).
        """
        lines = data.decode().splitlines()
        if not lines:
            raise StateError("empty snapshot")
        try:
            header = json.loads(lines[0])
            curve = WeierstrassCurve.from_json_dict(header)
            ledger = cls(group_id=str(header["group_id"]), curve=curve)
            for line in lines[1:]:
                entry = LedgerEntry.from_json_dict(json.loads(line))
                ledger.entries.append(entry)
                ledger._labels.add(entry.device_label)
        except (KeyError, ValueError) as exc:
            raise StateError(f"malformed snapshot: {exc}") from exc
        if len(ledger.entries) != int(header["entry_count"]):
            raise StateError("snapshot entry count mismatch")
        return ledger

    def export_jsonl(self) -> str:
        """Ledger export (same entry lines as the snapshot, no header)."""
        return "".join(
            json.dumps(e.to_json_dict(i), sort_keys=True, separators=(",", ":")) + "\n"
            for i, e in enumerate(self.entries)
        )

    # --- edge-side persistence (stays in the secure zone's state dir) -----

    def state_dict(self) -> dict:
        """Full edge-side state, including the used-point registry."""
        return {
            "group_id": self.group_id,
            "curve": self.curve.to_json_dict(),
            "entries": [e.to_json_dict(i) for i, e in enumerate(self.entries)],
            "used_points": [[hex(x), hex(y)] for x, y in sorted(self.used_points)],
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "IdentityLedger":
        try:
            ledger = cls(
                group_id=str(d["group_id"]),
                curve=WeierstrassCurve.from_json_dict(d["curve"]),
            )
            for ed in d["entries"]:
                entry = LedgerEntry.from_json_dict(ed)
                ledger.entries.append(entry)
                ledger._labels.add(entry.device_label)
            ledger.used_points = {
                (int(x, 0), int(y, 0)) for x, y in d.get("used_points", [])
            }
        except (KeyError, ValueError, TypeError) as exc:
            raise StateError(f"corrupted ledger state: {exc}") from exc
        return ledger

    def find_device(self, device_label: str) -> Optional[LedgerEntry]:
        for entry in self.entries:
            if entry.device_label == device_label:
                return entry
        return None
