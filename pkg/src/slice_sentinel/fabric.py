"""Simulated SDN slice fabric.

Edge switches stand in for gNodeBs, core switches carry the slice paths and
hosts terminate them.  Slices are VLAN tags, forwarding is flow-table driven
with a punt-to-controller default at every edge, and every node exposes a
deterministic attestation measurement.  Time is virtual: integer milliseconds
advanced per hop plus per-security-function processing cost.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Union

VLAN_MIN = 1
VLAN_MAX = 4094
DEFAULT_PUNT_RULE_ID = "default-punt"
DEFAULT_LINK_LATENCY_MS = 1
MAX_HOPS = 64


class TopologyError(ValueError):
    """Raised when a topology document is malformed."""


class UnknownNodeError(KeyError):
    """Raised when an operation references a node id the fabric does not know."""


class NodeKind(str, Enum):
    EDGE = "edge"
    CORE = "core"
    HOST = "host"


class Provenance(str, Enum):
    CONTROLLER = "controller"
    EXTERNAL = "external"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Packets and flow rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PacketHeader:
    """What a punt event carries to the controller: header fields only."""

    src_ip: str
    dst_ip: str
    src_mac: str
    dst_mac: str
    flow_id: str
    slice_id: Optional[int]
    virtual_timestamp: int


@dataclass
class Packet:
    src_ip: str
    dst_ip: str
    src_mac: str
    dst_mac: str
    payload: bytes = b""
    flow_id: str = ""
    slice_id: Optional[int] = None
    virtual_timestamp: int = 0

    def header(self) -> PacketHeader:
        return PacketHeader(
            src_ip=self.src_ip,
            dst_ip=self.dst_ip,
            src_mac=self.src_mac,
            dst_mac=self.dst_mac,
            flow_id=self.flow_id,
            slice_id=self.slice_id,
            virtual_timestamp=self.virtual_timestamp,
        )


@dataclass(frozen=True)
class FlowKey:
    """Match fields of a flow rule. ``None`` means wildcard."""

    src_ip: Optional[str] = None
    dst_ip: Optional[str] = None
    src_mac: Optional[str] = None
    dst_mac: Optional[str] = None
    slice_id: Optional[int] = None

    def matches(self, packet: Packet) -> bool:
        if self.src_ip is not None and packet.src_ip != self.src_ip:
            return False
        if self.dst_ip is not None and packet.dst_ip != self.dst_ip:
            return False
        if self.src_mac is not None and packet.src_mac != self.src_mac:
            return False
        if self.dst_mac is not None and packet.dst_mac != self.dst_mac:
            return False
        if self.slice_id is not None and packet.slice_id != self.slice_id:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "src_ip": self.src_ip,
            "dst_ip": self.dst_ip,
            "src_mac": self.src_mac,
            "dst_mac": self.dst_mac,
            "slice_id": self.slice_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlowKey":
        return cls(
            src_ip=d.get("src_ip"),
            dst_ip=d.get("dst_ip"),
            src_mac=d.get("src_mac"),
            dst_mac=d.get("dst_mac"),
            slice_id=d.get("slice_id"),
        )


@dataclass(frozen=True)
class Forward:
    port: int
    slice_id: int


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class PuntToController:
    pass


Action = Union[Forward, Drop, PuntToController]


def action_to_dict(action: Action) -> dict:
    if isinstance(action, Forward):
        return {"kind": "forward", "port": action.port, "slice_id": action.slice_id}
    if isinstance(action, Drop):
        return {"kind": "drop"}
    if isinstance(action, PuntToController):
        return {"kind": "punt"}
    raise TypeError(f"not a flow action: {action!r}")


def action_from_dict(d: dict) -> Action:
    kind = d["kind"]
    if kind == "forward":
        return Forward(port=d["port"], slice_id=d["slice_id"])
    if kind == "drop":
        return Drop()
    if kind == "punt":
        return PuntToController()
    raise ValueError(f"unknown action kind {kind!r}")


@dataclass(frozen=True)
class FlowRule:
    rule_id: str
    match: FlowKey
    action: Action
    priority: int
    provenance: Provenance = Provenance.CONTROLLER

    def reported(self) -> "ReportedRule":
        return ReportedRule(
            rule_id=self.rule_id,
            match=self.match,
            action=self.action,
            priority=self.priority,
        )


@dataclass(frozen=True)
class ReportedRule:
    """A flow rule as a switch reports it: no injection provenance.

    A real switch cannot know whether a rule came from its controller or from
    an attacker, so provenance is stripped before a rule enters any report.
    """

    rule_id: str
    match: FlowKey
    action: Action
    priority: int

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "match": self.match.to_dict(),
            "action": action_to_dict(self.action),
            "priority": self.priority,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportedRule":
        return cls(
            rule_id=d["rule_id"],
            match=FlowKey.from_dict(d["match"]),
            action=action_from_dict(d["action"]),
            priority=d["priority"],
        )


def canonical_rule_order(rules: Iterable[ReportedRule]) -> tuple[ReportedRule, ...]:
    """Priority descending, then rule id ascending. Shared by every report."""
    return tuple(sorted(rules, key=lambda r: (-r.priority, r.rule_id)))


# ---------------------------------------------------------------------------
# Flow table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TableDelta:
    added: tuple[FlowRule, ...] = ()
    removed: tuple[FlowRule, ...] = ()
    warning: bool = False


@dataclass(frozen=True)
class FlowMod:
    kind: str  # "add" | "delete"
    rule: Optional[FlowRule] = None
    rule_id: Optional[str] = None

    @classmethod
    def add(cls, rule: FlowRule) -> "FlowMod":
        return cls(kind="add", rule=rule)

    @classmethod
    def delete(cls, rule_id: str) -> "FlowMod":
        return cls(kind="delete", rule_id=rule_id)


class FlowTable:
    """Match-action table with (match, priority) uniqueness."""

    def __init__(self) -> None:
        self._rules: dict[str, FlowRule] = {}
        self._by_match: dict[tuple[FlowKey, int], str] = {}
        self._ordered: Optional[list[FlowRule]] = None

    def __len__(self) -> int:
        return len(self._rules)

    def rules(self) -> list[FlowRule]:
        return list(self._rules.values())

    def add(self, rule: FlowRule) -> TableDelta:
        removed = []
        # An add with an existing (match, priority) replaces that rule.
        slot = (rule.match, rule.priority)
        existing_id = self._by_match.get(slot)
        if existing_id is not None and existing_id != rule.rule_id:
            removed.append(self._rules.pop(existing_id))
        previous = self._rules.pop(rule.rule_id, None)
        if previous is not None:
            removed.append(previous)
            del self._by_match[(previous.match, previous.priority)]
        self._rules[rule.rule_id] = rule
        self._by_match[slot] = rule.rule_id
        self._ordered = None
        return TableDelta(added=(rule,), removed=tuple(removed))

    def delete(self, rule_id: str) -> TableDelta:
        rule = self._rules.pop(rule_id, None)
        self._ordered = None
        if rule is None:
            return TableDelta(warning=True)
        del self._by_match[(rule.match, rule.priority)]
        return TableDelta(removed=(rule,))

    def lookup(self, packet: Packet) -> Optional[FlowRule]:
        """Highest priority first; equal priorities break on lowest rule id."""
        if self._ordered is None:
            self._ordered = sorted(
                self._rules.values(), key=lambda r: (-r.priority, r.rule_id)
            )
        for rule in self._ordered:
            if rule.match.matches(packet):
                return rule
        return None


# ---------------------------------------------------------------------------
# Attestation and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttestationReport:
    node_id: str
    measured_hash: bytes
    nonce: bytes


@dataclass(frozen=True)
class SwitchStateReport:
    node_id: str
    rules: tuple[ReportedRule, ...]
    report_time: int

    def to_json(self) -> str:
        return canonical_json(
            {
                "node_id": self.node_id,
                "report_time": self.report_time,
                "rules": [r.to_dict() for r in self.rules],
            }
        )


# ---------------------------------------------------------------------------
# Forwarding traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Delivered:
    host: str


@dataclass(frozen=True)
class Dropped:
    node: str
    reason: str


@dataclass(frozen=True)
class Punted:
    node: str


Outcome = Union[Delivered, Dropped, Punted]


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # "slice-access" | "flow-validation" | "encrypt" | "decrypt" | "link" | "punt"
    node: str
    time_ms: int
    detail: dict = field(default_factory=dict)
    payload: Optional[bytes] = None


@dataclass
class ForwardingTrace:
    flow_id: str
    events: list[TraceEvent]
    outcome: Outcome

    def link_events(self) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == "link"]


@dataclass(frozen=True)
class PuntEvent:
    node: str
    port: int
    header: PacketHeader
    time_ms: int


@dataclass
class IngressDecision:
    """What an ingress security processor tells the datapath.

    ``events`` are appended to the forwarding trace in order, so the
    processor's internal pipeline ordering is observable.
    """

    allow: bool
    reason: Optional[str] = None
    events: list[TraceEvent] = field(default_factory=list)
    cost_us: int = 0


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

@dataclass
class Node:
    node_id: str
    kind: NodeKind
    ip: Optional[str] = None
    tampered: bool = False
    table: FlowTable = field(default_factory=FlowTable)
    descriptor: bytes = b""
    expected_hash: bytes = b""
    # port -> (peer node id, peer port, latency ms)
    ports: dict[int, tuple[str, int, int]] = field(default_factory=dict)


@dataclass
class SliceDef:
    vlan: int
    name: str
    hosts: frozenset[str]


class Fabric:
    """A built topology plus its mutable runtime state."""

    def __init__(self) -> None:
        self.nodes: dict[str, Node] = {}
        self.slices: dict[int, SliceDef] = {}
        self.clock_ms: int = 0
        self.punt_events: deque[PuntEvent] = deque()
        self.ingress_processors: dict[str, object] = {}
        # node -> flow_id -> ("encrypt"|"decrypt", cipher)
        self.flow_ciphers: dict[str, dict[str, tuple[str, object]]] = {}
        self._route_cache: dict[str, dict[str, str]] = {}

    # -- node helpers -------------------------------------------------------

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def host_by_ip(self, ip: str) -> Optional[str]:
        for node in self.nodes.values():
            if node.kind == NodeKind.HOST and node.ip == ip:
                return node.node_id
        return None

    def edge_nodes(self) -> list[str]:
        return sorted(n.node_id for n in self.nodes.values() if n.kind == NodeKind.EDGE)

    def port_toward(self, node_id: str, peer_id: str) -> Optional[int]:
        for port, (peer, _pport, _lat) in sorted(self.node(node_id).ports.items()):
            if peer == peer_id:
                return port
        return None

    def set_tampered(self, node_id: str, tampered: bool) -> None:
        self.node(node_id).tampered = tampered

    def set_ingress_processor(self, node_id: str, processor: object) -> None:
        self.node(node_id)
        self.ingress_processors[node_id] = processor

    def set_flow_cipher(self, node_id: str, flow_id: str, mode: str, cipher: object) -> None:
        if mode not in ("encrypt", "decrypt"):
            raise ValueError(f"cipher mode must be encrypt or decrypt, got {mode!r}")
        self.node(node_id)
        self.flow_ciphers.setdefault(node_id, {})[flow_id] = (mode, cipher)

    # -- routing ------------------------------------------------------------

    def shortest_path(self, src: str, dst: str) -> Optional[list[str]]:
        """BFS path over node ids; deterministic via sorted neighbor order."""
        self.node(src)
        self.node(dst)
        parents = self._route_cache.get(dst)
        if parents is None:
            parents = self._bfs_parents(dst)
            self._route_cache[dst] = parents
        if src not in parents and src != dst:
            return None
        path = [src]
        at = src
        while at != dst:
            at = parents[at]
            path.append(at)
        return path

    def _bfs_parents(self, dst: str) -> dict[str, str]:
        # Parent pointers toward dst, computed once per destination.
        parents: dict[str, str] = {}
        seen = {dst}
        queue = deque([dst])
        while queue:
            at = queue.popleft()
            neighbors = sorted(peer for peer, _p, _l in self.nodes[at].ports.values())
            for peer in neighbors:
                if peer not in seen:
                    seen.add(peer)
                    parents[peer] = at
                    queue.append(peer)
        return parents


def _node_descriptor(node_id: str, kind: str, ip: Optional[str]) -> bytes:
    return canonical_json({"id": node_id, "ip": ip, "kind": kind}).encode()


def build_topology(config: dict) -> Fabric:
    """Build a fabric from a topology document.

    The document declares ``nodes`` (id, kind, optional ip/tampered),
    ``links`` (a, b, latency_ms) and ``slices`` (vlan, name, hosts).  Edge
    switches start with a single punt-to-controller rule; everything else
    starts empty.  Each node's expected attestation hash is fixed here.
    """
    fabric = Fabric()
    for raw in config.get("nodes", []):
        node_id = raw["id"]
        if node_id in fabric.nodes:
            raise TopologyError(f"duplicate node id {node_id!r}")
        try:
            kind = NodeKind(raw.get("kind", "core"))
        except ValueError:
            raise TopologyError(f"unknown node kind {raw.get('kind')!r}") from None
        descriptor = _node_descriptor(node_id, kind.value, raw.get("ip"))
        node = Node(
            node_id=node_id,
            kind=kind,
            ip=raw.get("ip"),
            tampered=bool(raw.get("tampered", False)),
            descriptor=descriptor,
            expected_hash=hashlib.sha256(descriptor).digest(),
        )
        if kind == NodeKind.EDGE:
            node.table.add(
                FlowRule(
                    rule_id=DEFAULT_PUNT_RULE_ID,
                    match=FlowKey(),
                    action=PuntToController(),
                    priority=0,
                    provenance=Provenance.CONTROLLER,
                )
            )
        fabric.nodes[node_id] = node

    for link in config.get("links", []):
        a, b = link["a"], link["b"]
        for end in (a, b):
            if end not in fabric.nodes:
                raise TopologyError(f"link references undefined node {end!r}")
        latency = int(link.get("latency_ms", DEFAULT_LINK_LATENCY_MS))
        node_a, node_b = fabric.nodes[a], fabric.nodes[b]
        port_a = max(node_a.ports, default=0) + 1
        port_b = max(node_b.ports, default=0) + 1
        node_a.ports[port_a] = (b, port_b, latency)
        node_b.ports[port_b] = (a, port_a, latency)

    for raw in config.get("slices", []):
        vlan = int(raw["vlan"])
        if not VLAN_MIN <= vlan <= VLAN_MAX:
            raise TopologyError(f"slice id {vlan} outside VLAN range {VLAN_MIN}..{VLAN_MAX}")
        if vlan in fabric.slices:
            raise TopologyError(f"duplicate slice vlan {vlan}")
        hosts = raw.get("hosts", [])
        for host in hosts:
            if host not in fabric.nodes:
                raise TopologyError(f"slice {vlan} references undefined node {host!r}")
        fabric.slices[vlan] = SliceDef(vlan=vlan, name=raw.get("name", f"vlan{vlan}"), hosts=frozenset(hosts))

    return fabric


def load_topology(path) -> Fabric:
    with open(path, "r", encoding="utf-8") as fh:
        return build_topology(json.load(fh))


# ---------------------------------------------------------------------------
# Fabric operations
# ---------------------------------------------------------------------------

def apply_flow_mod(
    fabric: Fabric,
    node_id: str,
    mod: FlowMod,
    provenance: Provenance = Provenance.CONTROLLER,
) -> TableDelta:
    """Apply an add or delete to a node's table, stamping provenance."""
    node = fabric.node(node_id)
    if mod.kind == "add":
        if mod.rule is None:
            raise ValueError("add flow mod without a rule")
        rule = replace(mod.rule, provenance=provenance)
        return node.table.add(rule)
    if mod.kind == "delete":
        if mod.rule_id is None:
            raise ValueError("delete flow mod without a rule id")
        return node.table.delete(mod.rule_id)
    raise ValueError(f"unknown flow mod kind {mod.kind!r}")


def report_flow_rules(fabric: Fabric, node_id: str) -> SwitchStateReport:
    """Canonical snapshot of a node's table; pure function of its contents."""
    node = fabric.node(node_id)
    rules = canonical_rule_order(r.reported() for r in node.table.rules())
    return SwitchStateReport(node_id=node_id, rules=rules, report_time=fabric.clock_ms)


def measure_attestation(fabric: Fabric, node_id: str, nonce: bytes) -> AttestationReport:
    """Measure a node's software state and echo the challenge nonce.

    The measurement is a digest of the node's descriptor; a tampered node's
    measurement diverges from the expected hash fixed at build time.
    """
    if len(nonce) != 16:
        raise ValueError("attestation nonce must be 16 bytes")
    node = fabric.node(node_id)
    material = node.descriptor + (b"|tampered" if node.tampered else b"")
    return AttestationReport(
        node_id=node_id,
        measured_hash=hashlib.sha256(material).digest(),
        nonce=nonce,
    )


def _apply_ciphers(
    fabric: Fabric,
    node_id: str,
    flow_id: str,
    payload: bytes,
    encrypted: bool,
    next_is_host: bool,
    time_ms: int,
    events: list[TraceEvent],
) -> tuple[bytes, bool]:
    entry = fabric.flow_ciphers.get(node_id, {}).get(flow_id)
    if entry is None:
        return payload, encrypted
    mode, cipher = entry
    if mode == "encrypt" and not encrypted:
        envelope = cipher.encrypt(payload)
        payload = envelope.to_bytes()
        events.append(
            TraceEvent(kind="encrypt", node=node_id, time_ms=time_ms,
                       detail={"flow_id": flow_id, "key_id": envelope.key_id})
        )
        encrypted = True
    elif mode == "decrypt" and encrypted and next_is_host:
        from .security_functions import CipherEnvelope  # local import: avoid cycle

        envelope = CipherEnvelope.from_bytes(payload)
        payload = cipher.decrypt(envelope)
        events.append(
            TraceEvent(kind="decrypt", node=node_id, time_ms=time_ms,
                       detail={"flow_id": flow_id, "key_id": envelope.key_id})
        )
        encrypted = False
    return payload, encrypted


def inject_packet(fabric: Fabric, packet: Packet, ingress: tuple[str, int]) -> ForwardingTrace:
    """Push a packet into the fabric at an edge and run it to an outcome.

    The ingress node's security processor (if deployed) runs before table
    lookup.  A punt emits a controller event carrying only the packet header.
    """
    node_id, _port = ingress
    fabric.node(node_id)
    work = replace(packet)
    events: list[TraceEvent] = []
    encrypted = False

    processor = fabric.ingress_processors.get(node_id)
    if processor is not None:
        decision: IngressDecision = processor.process(work)
        events.extend(decision.events)
        work.virtual_timestamp += decision.cost_us // 1000
        if not decision.allow:
            fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
            return ForwardingTrace(
                flow_id=work.flow_id,
                events=events,
                outcome=Dropped(node=node_id, reason=decision.reason or "denied"),
            )

    at = node_id
    for _hop in range(MAX_HOPS):
        node = fabric.nodes[at]
        rule = node.table.lookup(work)
        if rule is None:
            fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
            return ForwardingTrace(work.flow_id, events, Dropped(node=at, reason="no-matching-rule"))
        if isinstance(rule.action, PuntToController):
            punt = PuntEvent(node=at, port=_port, header=work.header(), time_ms=work.virtual_timestamp)
            fabric.punt_events.append(punt)
            events.append(TraceEvent(kind="punt", node=at, time_ms=work.virtual_timestamp,
                                     detail={"flow_id": work.flow_id}))
            fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
            return ForwardingTrace(work.flow_id, events, Punted(node=at))
        if isinstance(rule.action, Drop):
            fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
            return ForwardingTrace(work.flow_id, events, Dropped(node=at, reason=f"drop-rule:{rule.rule_id}"))

        # Forward
        work.slice_id = rule.action.slice_id
        link = node.ports.get(rule.action.port)
        if link is None:
            fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
            return ForwardingTrace(work.flow_id, events, Dropped(node=at, reason="dead-port"))
        peer_id, peer_port, latency = link
        peer = fabric.nodes[peer_id]
        work.payload, encrypted = _apply_ciphers(
            fabric, at, work.flow_id, work.payload, encrypted,
            next_is_host=(peer.kind == NodeKind.HOST),
            time_ms=work.virtual_timestamp, events=events,
        )
        work.virtual_timestamp += latency
        events.append(
            TraceEvent(
                kind="link",
                node=at,
                time_ms=work.virtual_timestamp,
                detail={"to": peer_id, "port": rule.action.port, "peer_port": peer_port,
                        "slice_id": work.slice_id, "encrypted": encrypted},
                payload=work.payload,
            )
        )
        if peer.kind == NodeKind.HOST:
            fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
            slice_def = fabric.slices.get(work.slice_id) if work.slice_id is not None else None
            if work.slice_id is not None and (slice_def is None or peer_id not in slice_def.hosts):
                return ForwardingTrace(work.flow_id, events, Dropped(node=at, reason="slice-violation"))
            return ForwardingTrace(work.flow_id, events, Delivered(host=peer_id))
        at = peer_id

    fabric.clock_ms = max(fabric.clock_ms, work.virtual_timestamp)
    return ForwardingTrace(work.flow_id, events, Dropped(node=at, reason="hop-limit"))
