"""Slice access policies and the trusted activity log.

The policy repository stores per-device slice/service authorizations in the
JSON shape used by the controller (``hostip``/``hostmac``/``destip``/
``dstmac``/``Slice-id``/``Service`` field names), indexes them by device and
by user, and answers flow authorization queries.  The activity log is a
hash-chained, tamper-evident record of controller actions from which the
expected state of any switch can be reconstructed.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Optional, Union

from .fabric import (
    VLAN_MAX,
    VLAN_MIN,
    FlowTable,
    FlowRule,
    ReportedRule,
    canonical_json,
    canonical_rule_order,
)

VALID_SECURITY_REQS = frozenset(
    {"confidentiality", "integrity", "authentication", "accountability"}
)
PERSONAL_ROLE = "Personal-Role"

_SLICE_ID_RE = re.compile(r"^VLAN(\d+)$")


class PolicyError(ValueError):
    """Raised when a policy document violates the schema."""


# ---------------------------------------------------------------------------
# Policy rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UserAttributes:
    user_id: str
    name: str = ""
    role: str = PERSONAL_ROLE
    organization: str = ""


@dataclass(frozen=True)
class PolicyAction:
    service: str
    slice_id: int
    security_reqs: frozenset[str] = frozenset()
    whitelist: tuple[str, ...] = ()
    blacklist: tuple[str, ...] = ()


@dataclass(frozen=True)
class PolicyRule:
    policy_id: str
    device_ip: str
    device_mac: str
    dest_ip: str
    user: UserAttributes
    contract_id: str
    actions: tuple[PolicyAction, ...]
    dest_mac: Optional[str] = None
    flow_id: Optional[str] = None
    request_id: Optional[str] = None
    device_type: str = "unknown"

    @property
    def device_id(self) -> str:
        # The MAC is the authoritative device identity; the IP may change.
        return self.device_mac

    @property
    def services(self) -> frozenset[str]:
        return frozenset(a.service for a in self.actions)


def _parse_slice_id(raw) -> int:
    if isinstance(raw, int):
        vlan = raw
    else:
        m = _SLICE_ID_RE.match(str(raw))
        if not m:
            raise PolicyError(f"unknown slice reference {raw!r} (expected VLAN<n>)")
        vlan = int(m.group(1))
    if not VLAN_MIN <= vlan <= VLAN_MAX:
        raise PolicyError(f"unknown slice reference {raw!r} (VLAN outside {VLAN_MIN}..{VLAN_MAX})")
    return vlan


def _parse_action(raw: dict, policy_id: str) -> PolicyAction:
    if "Service" not in raw or "Slice-id" not in raw:
        raise PolicyError(f"policy {policy_id!r}: action needs Service and Slice-id")
    reqs = frozenset(raw.get("security", []))
    bad = reqs - VALID_SECURITY_REQS
    if bad:
        raise PolicyError(f"policy {policy_id!r}: unknown security requirements {sorted(bad)}")
    return PolicyAction(
        service=raw["Service"],
        slice_id=_parse_slice_id(raw["Slice-id"]),
        security_reqs=reqs,
        whitelist=tuple(raw.get("whitelist", [])),
        blacklist=tuple(raw.get("blacklist", [])),
    )


def parse_policy_rule(raw: dict) -> PolicyRule:
    for key in ("id", "hostip", "hostmac", "destip", "actions"):
        if key not in raw:
            raise PolicyError(f"policy entry missing required field {key!r}")
    policy_id = str(raw["id"])
    user_raw = raw.get("user", {})
    user = UserAttributes(
        user_id=str(user_raw.get("id", f"anon-{raw['hostmac']}")),
        name=user_raw.get("name", ""),
        role=user_raw.get("role", PERSONAL_ROLE),
        organization=user_raw.get("organization", ""),
    )
    actions = tuple(_parse_action(a, policy_id) for a in raw["actions"])
    if not actions:
        raise PolicyError(f"policy {policy_id!r}: empty actions")
    return PolicyRule(
        policy_id=policy_id,
        device_ip=raw["hostip"],
        device_mac=raw["hostmac"],
        dest_ip=raw["destip"],
        dest_mac=raw.get("dstmac"),
        flow_id=raw.get("flowid"),
        user=user,
        contract_id=str(raw.get("contract_id", f"contract-{user.user_id}")),
        actions=actions,
        request_id=raw.get("request_id"),
        device_type=raw.get("device_type", "unknown"),
    )


# ---------------------------------------------------------------------------
# Match results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Authorized:
    slice_id: int
    service: str
    security_reqs: frozenset[str]


@dataclass(frozen=True)
class Unauthorized:
    device_id: str


@dataclass(frozen=True)
class Unknown:
    pass


MatchResult = Union[Authorized, Unauthorized, Unknown]


# ---------------------------------------------------------------------------
# Security profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviceBinding:
    device_id: str
    device_type: str


@dataclass(frozen=True)
class ServiceContract:
    contract_id: str
    role: str
    devices: tuple[DeviceBinding, ...]
    # device_id -> {(slice_id, service)}
    allowed: dict
    # service -> security requirement set
    security_reqs: dict


@dataclass(frozen=True)
class SecurityProfile:
    user_id: str
    contracts: tuple[ServiceContract, ...]

    def device_ids(self) -> frozenset[str]:
        return frozenset(d.device_id for c in self.contracts for d in c.devices)

    def allowed_pairs(self, device_id: str) -> frozenset[tuple[int, str]]:
        """Union of (slice, service) pairs over all contracts covering the device."""
        pairs: set[tuple[int, str]] = set()
        for contract in self.contracts:
            pairs.update(contract.allowed.get(device_id, ()))
        return frozenset(pairs)

    def security_reqs_for(self, service: str) -> frozenset[str]:
        reqs: set[str] = set()
        for contract in self.contracts:
            reqs.update(contract.security_reqs.get(service, ()))
        return frozenset(reqs)

    def requires_confidentiality(self) -> bool:
        return any(
            "confidentiality" in reqs
            for c in self.contracts
            for reqs in c.security_reqs.values()
        )


# ---------------------------------------------------------------------------
# Repository
# ---------------------------------------------------------------------------

class PolicyRepository:
    """Indexed store of policy rules, keyed by device and by user."""

    def __init__(self) -> None:
        self.rules: list[PolicyRule] = []
        self._by_id: dict[str, PolicyRule] = {}
        self._by_mac: dict[str, list[PolicyRule]] = {}
        self._by_user: dict[str, list[PolicyRule]] = {}
        self._service_at: dict[str, tuple[int, str]] = {}

    def register(self, rule: PolicyRule) -> None:
        """Add one rule; used by loading and by out-of-band registration."""
        if rule.policy_id in self._by_id:
            raise PolicyError(f"duplicate policy id {rule.policy_id!r}")
        self.rules.append(rule)
        self._by_id[rule.policy_id] = rule
        self._by_mac.setdefault(rule.device_mac, []).append(rule)
        self._by_user.setdefault(rule.user.user_id, []).append(rule)
        action = rule.actions[0]
        self._service_at.setdefault(rule.dest_ip, (action.slice_id, action.service))

    def user_of_device(self, device_mac: str) -> Optional[str]:
        rules = self._by_mac.get(device_mac)
        return rules[0].user.user_id if rules else None

    def security_reqs(self, device_mac: str, pair: tuple[int, str]) -> frozenset[str]:
        """Requirements a device's policies attach to one (slice, service) pair."""
        for rule in self._by_mac.get(device_mac, []):
            for action in rule.actions:
                if (action.slice_id, action.service) == pair:
                    return action.security_reqs
        return frozenset()

    def device_known(self, device_mac: str) -> bool:
        return device_mac in self._by_mac

    def service_at(self, dest_ip: str) -> Optional[tuple[int, str]]:
        """The (slice, service) a destination IP hosts, if any rule names it."""
        return self._service_at.get(dest_ip)

    def match(self, src_ip: str, src_mac: str, dst_ip: str) -> MatchResult:
        """Total, pure flow-to-policy match.

        Authorized when some rule of the source device covers the destination
        service; Unauthorized when the device is registered but the pair is
        not allowed; Unknown when the device is not registered at all.
        """
        rules = self._by_mac.get(src_mac)
        if not rules:
            return Unknown()
        for rule in rules:
            if rule.dest_ip == dst_ip:
                action = rule.actions[0]
                return Authorized(
                    slice_id=action.slice_id,
                    service=action.service,
                    security_reqs=action.security_reqs,
                )
        return Unauthorized(device_id=src_mac)


def load_policies(document: list) -> PolicyRepository:
    """Build a repository from a parsed policy JSON array."""
    if not isinstance(document, list):
        raise PolicyError("policy document must be a JSON array")
    repo = PolicyRepository()
    for raw in document:
        repo.register(parse_policy_rule(raw))
    return repo


def load_policies_file(path) -> PolicyRepository:
    with open(path, "r", encoding="utf-8") as fh:
        return load_policies(json.load(fh))


def extract_profile(repo: PolicyRepository, user_id: str) -> Optional[SecurityProfile]:
    """Assemble the full profile of a user: all devices, all slices, all services.

    Returns ``None`` when the user has no contracts; callers treat that as
    the guest case, not as an error.
    """
    rules = repo._by_user.get(user_id)
    if not rules:
        return None
    by_contract: dict[str, list[PolicyRule]] = {}
    for rule in rules:
        by_contract.setdefault(rule.contract_id, []).append(rule)
    contracts = []
    for contract_id in sorted(by_contract):
        contract_rules = by_contract[contract_id]
        devices: dict[str, str] = {}
        allowed: dict[str, set] = {}
        reqs: dict[str, set] = {}
        for rule in contract_rules:
            devices.setdefault(rule.device_id, rule.device_type)
            pairs = allowed.setdefault(rule.device_id, set())
            for action in rule.actions:
                pairs.add((action.slice_id, action.service))
                reqs.setdefault(action.service, set()).update(action.security_reqs)
        contracts.append(
            ServiceContract(
                contract_id=contract_id,
                role=contract_rules[0].user.role,
                devices=tuple(
                    DeviceBinding(device_id=d, device_type=t) for d, t in sorted(devices.items())
                ),
                allowed={d: frozenset(p) for d, p in allowed.items()},
                security_reqs={s: frozenset(r) for s, r in reqs.items()},
            )
        )
    return SecurityProfile(user_id=user_id, contracts=tuple(contracts))


# ---------------------------------------------------------------------------
# Activity log
# ---------------------------------------------------------------------------

GENESIS_HASH = bytes(32)

EV_RULE_INSTALLED = "rule-installed"
EV_RULE_DELETED = "rule-deleted"
EV_PROFILE_EXTRACTED = "profile-extracted"
EV_FUNCTIONS_DEPLOYED = "security-functions-deployed"
EV_ALERT_RAISED = "alert-raised"
EV_ACCESS_DENIED = "access-denied"
EV_DEVICE_BLACKLISTED = "device-blacklisted"
EV_KEY_GENERATED = "key-generated"
EV_KEY_DISTRIBUTED = "key-distributed"
EV_SERVICE_DEPLOYED = "service-deployed"
EV_SERVICE_REFUSED = "service-refused"
EV_AUDIT_PERFORMED = "audit-performed"
EV_CORRECTIVE_ACTION = "corrective-action"
EV_HANDOVER = "handover"


class LogIntegrityError(Exception):
    """Raised when the activity log's hash chain does not verify."""


@dataclass(frozen=True)
class LogEntry:
    seq: int
    event: dict
    prev_hash: bytes
    entry_hash: bytes

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "event": self.event,
            "prev_hash": self.prev_hash.hex(),
            "entry_hash": self.entry_hash.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogEntry":
        return cls(
            seq=d["seq"],
            event=d["event"],
            prev_hash=bytes.fromhex(d["prev_hash"]),
            entry_hash=bytes.fromhex(d["entry_hash"]),
        )


def _entry_hash(seq: int, event: dict, prev_hash: bytes) -> bytes:
    material = seq.to_bytes(8, "big") + canonical_json(event).encode() + prev_hash
    return hashlib.sha256(material).digest()


@dataclass(frozen=True)
class TrustedReport:
    """Expected switch state reconstructed from the activity log."""

    node_id: str
    rules: tuple[ReportedRule, ...]

    def to_json(self) -> str:
        return canonical_json(
            {"node_id": self.node_id, "rules": [r.to_dict() for r in self.rules]}
        )


class ActivityLog:
    """Hash-chained append-only log of controller actions."""

    def __init__(self) -> None:
        self.entries: list[LogEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, event: dict) -> LogEntry:
        if "type" not in event:
            raise ValueError("activity log events need a 'type' field")
        seq = len(self.entries)
        prev = self.entries[-1].entry_hash if self.entries else GENESIS_HASH
        entry = LogEntry(seq=seq, event=event, prev_hash=prev, entry_hash=_entry_hash(seq, event, prev))
        self.entries.append(entry)
        return entry

    def verify(self) -> bool:
        prev = GENESIS_HASH
        for i, entry in enumerate(self.entries):
            if entry.seq != i or entry.prev_hash != prev:
                return False
            if entry.entry_hash != _entry_hash(entry.seq, entry.event, entry.prev_hash):
                return False
            prev = entry.entry_hash
        return True

    def events(self, event_type: Optional[str] = None) -> list[dict]:
        if event_type is None:
            return [e.event for e in self.entries]
        return [e.event for e in self.entries if e.event.get("type") == event_type]

    def expected_switch_state(self, node_id: str) -> TrustedReport:
        """Fold rule install/delete events for a node into a canonical report."""
        if not self.verify():
            raise LogIntegrityError("activity log hash chain is broken")
        table = FlowTable()
        for entry in self.entries:
            event = entry.event
            if event.get("node") != node_id:
                continue
            if event["type"] == EV_RULE_INSTALLED:
                reported = ReportedRule.from_dict(event["rule"])
                table.add(
                    FlowRule(
                        rule_id=reported.rule_id,
                        match=reported.match,
                        action=reported.action,
                        priority=reported.priority,
                    )
                )
            elif event["type"] == EV_RULE_DELETED:
                table.delete(event["rule_id"])
        rules = canonical_rule_order(r.reported() for r in table.rules())
        return TrustedReport(node_id=node_id, rules=rules)

    # -- persistence (JSON lines, one entry per line) ------------------------

    def to_jsonl(self) -> str:
        return "".join(canonical_json(e.to_dict()) + "\n" for e in self.entries)

    @classmethod
    def from_jsonl(cls, text: str) -> "ActivityLog":
        log = cls()
        for line in text.splitlines():
            if line.strip():
                log.entries.append(LogEntry.from_dict(json.loads(line)))
        return log

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def load(cls, path) -> "ActivityLog":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())
