"""Deterministic single-process simulation of the two-level hierarchy.

One edge node (secure zone + identity ledger + Bloom pre-filter) talks to
one cloud node (ledger replica + cloud-held key shares) over an in-process
channel.  A scripted adversary can tamper with shares in flight, forge
shares, replay transactions, or flip bits in the cloud's ledger replica;
every adversary action is logged together with its detection outcome.

Time is a logical tick counter and all randomness derives from the scenario
seed, so replaying a scenario yields a byte-identical event log.  The log
header echoes a hash of the scenario config as a code-integrity stand-in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .bloom import BloomFilter
from .crypto import TimestampAuthority, Timestamp, derive_seed, sha256
from .curves import WeierstrassCurve, standard_curve
from .errors import ClassificationError, ScenarioConfigError
from .ledger import IdentityLedger, LedgerEntry
from .securezone import SecureZone
from .shares import SealedShare
from .crypto import AeadRecord

__all__ = [
    "SimStep",
    "SimScenario",
    "SimEvent",
    "Verdict",
    "RunResult",
    "run_scenario",
    "replay_determinism_check",
    "events_to_jsonl",
    "edge_data_split",
    "DataSplit",
    "builtin_scenarios",
]

ATTACK_KINDS = ("tamper-share", "forge-share", "replay", "tamper-ledger-bit")


@dataclass
class SimStep:
    action: str  # register | transact | attack
    device: Optional[str] = None
    kind: Optional[str] = None  # attack kind
    expect: Optional[str] = None
    entry: Optional[int] = None  # tamper-ledger-bit target entry
    bit: Optional[int] = None  # tamper-ledger-bit target bit

    def to_json_dict(self) -> dict:
        d = {"action": self.action}
        for key in ("device", "kind", "expect", "entry", "bit"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SimStep":
        known = {k: d[k] for k in ("action", "device", "kind", "expect", "entry", "bit") if k in d}
        return cls(**known)


@dataclass
class SimScenario:
    name: str
    seed: int
    device_count: int
    script: list[SimStep]
    order: int = 256
    curve: Optional[WeierstrassCurve] = None

    def to_json_dict(self) -> dict:
        d = {
            "name": self.name,
            "seed": self.seed,
            "device_count": self.device_count,
            "order": self.order,
            "script": [s.to_json_dict() for s in self.script],
        }
        if self.curve is not None:
            d["curve"] = self.curve.to_json_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json_dict(cls, d: dict) -> "SimScenario":
        try:
            curve = WeierstrassCurve.from_json_dict(d["curve"]) if "curve" in d else None
            return cls(
                name=str(d["name"]),
                seed=int(d["seed"]),
                device_count=int(d["device_count"]),
                order=int(d.get("order", 256)),
                curve=curve,
                script=[SimStep.from_json_dict(s) for s in d["script"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioConfigError(f"malformed scenario: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "SimScenario":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioConfigError(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_json_dict(payload)

    def config_digest(self) -> str:
        canonical = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return sha256(canonical.encode()).hex()


@dataclass
class SimEvent:
    tick: int
    actor: str  # edge | cloud | adversary | tsa
    kind: str
    summary: dict
    outcome: str

    def to_json_dict(self) -> dict:
        return {
            "tick": self.tick,
            "actor": self.actor,
            "kind": self.kind,
            "summary": self.summary,
            "outcome": self.outcome,
        }


@dataclass
class Verdict:
    passed: bool
    diffs: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


class RunResult(NamedTuple):
    events: list[SimEvent]
    verdict: Verdict


class DataSplit(NamedTuple):
    timely: list
    historical: list


def edge_data_split(records: list[dict], policy: dict) -> DataSplit:
    """Partition records into edge-resident (timely) and cloud-bound
    (historical) disjoint segments.

    ``policy`` is either ``{"max_age": t}`` (records need an ``age`` tag;
    older than t goes to the cloud) or ``{"by": "category"}`` (records carry
    ``category`` of ``timely`` or ``historical``).  Untagged records raise.
    """
    timely: list = []
    historical: list = []
    if "max_age" in policy:
        limit = float(policy["max_age"])
        for rec in records:
            if "age" not in rec:
                raise ClassificationError(f"record lacks an 'age' tag: {rec!r}")
            (timely if float(rec["age"]) <= limit else historical).append(rec)
    elif policy.get("by") == "category":
        for rec in records:
            cat = rec.get("category")
            if cat == "timely":
                timely.append(rec)
            elif cat == "historical":
                historical.append(rec)
            else:
                raise ClassificationError(f"record lacks a valid 'category' tag: {rec!r}")
    else:
        raise ClassificationError(f"policy must set 'max_age' or 'by': {policy!r}")
    return DataSplit(timely=timely, historical=historical)


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------

class _Cloud:
    """The cloud node: ledger replica bytes plus its half of every key."""

    def __init__(self):
        self.replica: Optional[bytes] = None
        self.shares: dict[bytes, SealedShare] = {}

    def verify_replica(self):
        ledger = IdentityLedger.import_snapshot(self.replica)
        return ledger.verify_chain()


class _Runner:
    def __init__(self, scenario: SimScenario):
        if scenario.device_count < 0:
            raise ScenarioConfigError("device_count must be >= 0")
        for step in scenario.script:
            if step.action not in ("register", "transact", "attack"):
                raise ScenarioConfigError(f"unknown action {step.action!r}")
            if step.action == "attack" and step.kind not in ATTACK_KINDS:
                raise ScenarioConfigError(f"unknown attack kind {step.kind!r}")
        self.scenario = scenario
        self.tick = 0
        self.events: list[SimEvent] = []
        self.diffs: list[str] = []

        seed = scenario.seed
        self.tsa = TimestampAuthority(issuer="sim-tsa", clock=lambda: self.tick)
        self.zone = SecureZone(derive_seed(seed, b"zone"), self.tsa)
        curve = scenario.curve if scenario.curve is not None else standard_curve()
        self.zone.attach_ledger(IdentityLedger(group_id=scenario.name, curve=curve))
        self.bloom = BloomFilter.create(max(scenario.device_count, 1), 0.01)
        self.cloud = _Cloud()
        self.adversary_rng = np.random.default_rng(derive_seed(seed, b"adversary"))
        self.contexts: dict[str, bytes] = {}  # device label -> h2
        self.last_transaction: Optional[tuple[bytes, SealedShare, Timestamp]] = None

    def _emit(self, actor: str, kind: str, summary: dict, outcome: str) -> SimEvent:
        event = SimEvent(tick=self.tick, actor=actor, kind=kind, summary=summary, outcome=outcome)
        self.events.append(event)
        return event

    def _expect(self, step: SimStep, actual: str):
        if step.expect is not None and step.expect != actual:
            self.diffs.append(
                f"step {step.to_json_dict()}: expected {step.expect!r}, got {actual!r}"
            )

    # --- actions ---------------------------------------------------------

    def do_register(self, step: SimStep):
        label = step.device or f"device-{len(self.contexts)}"
        seed = self.scenario.seed
        entry = self.zone.register_device(label, rng_seed=derive_seed(seed, b"reg:" + label.encode()))
        self.contexts[label] = entry.h2
        self.bloom.insert(entry.h2)
        key_id = self.zone.generate_key(
            "data-encryption", rng_seed=derive_seed(seed, b"key:" + label.encode())
        )
        dist = self.zone.split_and_distribute(
            key_id, entry.h2, self.scenario.order,
            rng_seed=derive_seed(seed, b"split:" + label.encode()),
        )
        # channel: cloud share + fresh ledger snapshot travel to the cloud
        self.cloud.shares[entry.h2] = dist.cloud_share
        self.cloud.replica = self.zone.ledger.sync_to_cloud()
        replica_ok = self.cloud.verify_replica()
        self._emit(
            "edge", "register",
            {"device": label, "device_id": entry.h2.hex(), "key_id": key_id.hex()},
            "registered",
        )
        self._emit(
            "cloud", "ledger-sync",
            {"entries": len(self.zone.ledger), "replica_sha256": sha256(self.cloud.replica).hex()},
            "replica-verified" if replica_ok.valid else f"replica-invalid:{replica_ok.first_bad_index}",
        )
        self._expect(step, "registered")

    def _context_for(self, step: SimStep) -> bytes:
        label = step.device
        if label is None:
            if not self.contexts:
                raise ScenarioConfigError(f"step {step.to_json_dict()} needs a registered device")
            label = next(iter(self.contexts))
        if label not in self.contexts:
            raise ScenarioConfigError(f"device {label!r} is not registered")
        return self.contexts[label]

    def _authorize(self, context: bytes, share: SealedShare, ts: Timestamp) -> str:
        if not self.bloom.contains(context):
            return "rejected:not-in-filter"
        decision = self.zone.authorize_transaction(context, share, ts)
        return "accepted" if decision.accepted else f"rejected:{decision.reason}"

    def do_transact(self, step: SimStep):
        context = self._context_for(step)
        share = self.cloud.shares[context]
        ts = self.tsa.issue(for_context=context)
        outcome = self._authorize(context, share, ts)
        if outcome == "accepted":
            self.last_transaction = (context, share, ts)
        self._emit(
            "edge", "transaction",
            {"device": step.device, "context": context.hex(), "ts_sequence": ts.sequence},
            outcome,
        )
        self._expect(step, outcome)

    def do_attack(self, step: SimStep):
        handler = {
            "replay": self._attack_replay,
            "forge-share": self._attack_forge,
            "tamper-share": self._attack_tamper_share,
            "tamper-ledger-bit": self._attack_tamper_ledger,
        }[step.kind]
        outcome = handler(step)
        self._expect(step, outcome)

    def _attack_replay(self, step: SimStep) -> str:
        if self.last_transaction is None:
            raise ScenarioConfigError("replay attack needs a prior accepted transaction")
        context, share, ts = self.last_transaction
        outcome = self._authorize(context, share, ts)
        self._emit(
            "adversary", "attack-replay",
            {"context": context.hex(), "replayed_sequence": ts.sequence},
            outcome,
        )
        return outcome

    def _attack_forge(self, step: SimStep) -> str:
        context = self._context_for(step)
        rng = self.adversary_rng
        genuine = self.cloud.shares[context]
        forged = SealedShare(
            index=2,
            record=AeadRecord(
                nonce=rng.bytes(12),
                ciphertext=rng.bytes(len(genuine.record.ciphertext)),
                tag=rng.bytes(16),
            ),
            binding_tag=rng.bytes(32),
        )
        ts = self.tsa.issue(for_context=context)
        outcome = self._authorize(context, forged, ts)
        self._emit(
            "adversary", "attack-forge-share",
            {"context": context.hex(), "forged_tag": forged.binding_tag.hex()[:16]},
            outcome,
        )
        return outcome

    def _attack_tamper_share(self, step: SimStep) -> str:
        context = self._context_for(step)
        genuine = self.cloud.shares[context]
        ct = bytearray(genuine.record.ciphertext)
        bit = int(self.adversary_rng.integers(0, len(ct) * 8))
        ct[bit // 8] ^= 1 << (bit % 8)
        tampered = SealedShare(
            index=genuine.index,
            record=AeadRecord(genuine.record.nonce, bytes(ct), genuine.record.tag),
            binding_tag=genuine.binding_tag,
        )
        ts = self.tsa.issue(for_context=context)
        outcome = self._authorize(context, tampered, ts)
        self._emit(
            "adversary", "attack-tamper-share",
            {"context": context.hex(), "flipped_bit": bit},
            outcome,
        )
        return outcome

    def _attack_tamper_ledger(self, step: SimStep) -> str:
        if self.cloud.replica is None:
            raise ScenarioConfigError("tamper-ledger-bit needs a synced replica")
        replica = IdentityLedger.import_snapshot(self.cloud.replica)
        if not replica.entries:
            raise ScenarioConfigError("tamper-ledger-bit needs a non-empty replica")
        idx = step.entry if step.entry is not None else int(
            self.adversary_rng.integers(0, len(replica.entries))
        )
        if not 0 <= idx < len(replica.entries):
            raise ScenarioConfigError(f"tamper-ledger-bit entry {idx} out of range")
        entry = replica.entries[idx]
        ct = bytearray(entry.ciphertext_record.ciphertext)
        bit = step.bit if step.bit is not None else int(
            self.adversary_rng.integers(0, len(ct) * 8)
        )
        ct[(bit // 8) % len(ct)] ^= 1 << (bit % 8)
        replica.entries[idx] = LedgerEntry(
            device_label=entry.device_label,
            ciphertext_record=AeadRecord(
                entry.ciphertext_record.nonce, bytes(ct), entry.ciphertext_record.tag
            ),
            timestamp=entry.timestamp,
            h1=entry.h1,
            h2=entry.h2,
        )
        report = replica.verify_chain()
        outcome = (
            f"detected:{report.first_bad_index}" if not report.valid else "undetected"
        )
        self._emit(
            "adversary", "attack-tamper-ledger-bit",
            {"entry": idx, "bit": bit},
            outcome,
        )
        return outcome

    # --- main loop ---------------------------------------------------------

    def run(self) -> RunResult:
        for step in self.scenario.script:
            self.tick += 1
            if step.action == "register":
                self.do_register(step)
            elif step.action == "transact":
                self.do_transact(step)
            else:
                self.do_attack(step)

        # closing health checks at both nodes
        self.tick += 1
        edge_report = self.zone.ledger.verify_chain()
        self._emit(
            "edge", "final-verify", {"entries": len(self.zone.ledger)},
            "chain-valid" if edge_report.valid else f"chain-invalid:{edge_report.first_bad_index}",
        )
        if self.cloud.replica is not None:
            cloud_report = self.cloud.verify_replica()
            replica_matches = self.cloud.replica == self.zone.ledger.sync_to_cloud()
            self._emit(
                "cloud", "final-verify",
                {"replica_matches_edge": replica_matches},
                "chain-valid" if cloud_report.valid else f"chain-invalid:{cloud_report.first_bad_index}",
            )
            if not replica_matches:
                self.diffs.append("cloud replica diverged from edge ledger")
            if not cloud_report.valid:
                self.diffs.append("cloud replica chain invalid at run end")
        if not edge_report.valid:
            self.diffs.append("edge chain invalid at run end")

        for event in self.events:
            if event.actor == "adversary" and event.outcome == "accepted":
                self.diffs.append(f"attack succeeded: {event.kind} at tick {event.tick}")

        return RunResult(events=self.events, verdict=Verdict(passed=not self.diffs, diffs=self.diffs))


def run_scenario(scenario: SimScenario) -> RunResult:
    """Execute a scenario; see the module docstring for the node model."""
    return _Runner(scenario).run()


def events_to_jsonl(scenario: SimScenario, events: list[SimEvent]) -> bytes:
    """Serialize a run deterministically: header line + one line per event."""
    header = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "config_sha256": scenario.config_digest(),
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines += [
        json.dumps(e.to_json_dict(), sort_keys=True, separators=(",", ":")) for e in events
    ]
    return ("\n".join(lines) + "\n").encode()


def replay_determinism_check(scenario: SimScenario) -> bool:
    """Run the scenario twice; True iff the event logs are byte-identical."""
    first = events_to_jsonl(scenario, run_scenario(scenario).events)
    second = events_to_jsonl(scenario, run_scenario(scenario).events)
    return first == second


# ---------------------------------------------------------------------------
# built-in scenarios
# ---------------------------------------------------------------------------

def builtin_scenarios() -> dict[str, SimScenario]:
    """The shipped scenario suite; every attack must be detected."""
    happy_script = [SimStep(action="register", device=f"device-{i}", expect="registered")
                    for i in range(5)]
    happy_script += [
        SimStep(action="transact", device=f"device-{i % 5}", expect="accepted")
        for i in range(10)
    ]

    attack_script = [SimStep(action="register", device=f"device-{i}", expect="registered")
                     for i in range(3)]
    attack_script += [
        SimStep(action="transact", device="device-0", expect="accepted"),
        SimStep(action="attack", kind="replay", device="device-0", expect="rejected:replay"),
        SimStep(action="attack", kind="forge-share", device="device-1",
                expect="rejected:decrypt-failure"),
        SimStep(action="attack", kind="tamper-share", device="device-2",
                expect="rejected:decrypt-failure"),
        SimStep(action="attack", kind="tamper-ledger-bit", entry=1, expect="detected:1"),
        SimStep(action="transact", device="device-1", expect="accepted"),
    ]

    replay_script = [SimStep(action="register", device=f"device-{i}", expect="registered")
                     for i in range(2)]
    replay_script += [SimStep(action="transact", device="device-0", expect="accepted")]
    replay_script += [
        SimStep(action="attack", kind="replay", device="device-0", expect="rejected:replay")
        for _ in range(5)
    ]

    return {
        "happy-path": SimScenario(
            name="happy-path", seed=1001, device_count=5, script=happy_script
        ),
        "attack-suite": SimScenario(
            name="attack-suite", seed=2002, device_count=3, script=attack_script
        ),
        "replay-storm": SimScenario(
            name="replay-storm", seed=3003, device_count=2, script=replay_script
        ),
    }
