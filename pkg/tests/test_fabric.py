"""Fabric tests: topology building, forwarding, flow mods, reports, attestation."""

import random

import pytest

from slice_sentinel.fabric import (
    DEFAULT_PUNT_RULE_ID,
    Delivered,
    Drop,
    Dropped,
    FlowKey,
    FlowMod,
    FlowRule,
    Forward,
    Packet,
    Provenance,
    Punted,
    PuntToController,
    TopologyError,
    UnknownNodeError,
    apply_flow_mod,
    build_topology,
    inject_packet,
    measure_attestation,
    report_flow_rules,
)


def small_topology() -> dict:
    """One edge switch, one core, a UE and a service host, four slices."""
    return {
        "nodes": [
            {"id": "OVS1", "kind": "edge"},
            {"id": "CORE1", "kind": "core"},
            {"id": "UE1", "kind": "host", "ip": "10.0.0.1"},
            {"id": "SVC1", "kind": "host", "ip": "10.0.0.8"},
        ],
        "links": [
            {"a": "UE1", "b": "OVS1", "latency_ms": 1},
            {"a": "OVS1", "b": "CORE1", "latency_ms": 1},
            {"a": "CORE1", "b": "SVC1", "latency_ms": 1},
        ],
        "slices": [
            {"vlan": 100, "name": "home", "hosts": []},
            {"vlan": 200, "name": "healthcare", "hosts": ["UE1", "SVC1"]},
            {"vlan": 300, "name": "financial", "hosts": []},
            {"vlan": 4094, "name": "generic", "hosts": []},
        ],
    }


def ue_packet(**overrides) -> Packet:
    base = dict(
        src_ip="10.0.0.1",
        dst_ip="10.0.0.8",
        src_mac="00:09:00:AA",
        dst_mac="00:09:00:BB",
        payload=b"hello",
        flow_id="78b34x",
    )
    base.update(overrides)
    return Packet(**base)


class TestBuildTopology:
    def test_small_config_builds_with_punt_defaults(self):
        fabric = build_topology(small_topology())
        assert len(fabric.slices) == 4
        assert 200 in fabric.slices
        assert fabric.host_by_ip("10.0.0.1") == "UE1"
        assert fabric.host_by_ip("10.0.0.8") == "SVC1"
        edge_rules = fabric.nodes["OVS1"].table.rules()
        assert [r.rule_id for r in edge_rules] == [DEFAULT_PUNT_RULE_ID]
        assert isinstance(edge_rules[0].action, PuntToController)
        # core switches start empty
        assert fabric.nodes["CORE1"].table.rules() == []
        # per-node expected attestation hash fixed at build time
        assert len(fabric.nodes["OVS1"].expected_hash) == 32

    def test_empty_config_is_a_valid_empty_fabric(self):
        fabric = build_topology({})
        assert fabric.nodes == {}
        assert fabric.slices == {}

    def test_duplicate_node_id_rejected(self):
        config = {"nodes": [{"id": "OVS1", "kind": "edge"}, {"id": "OVS1", "kind": "core"}]}
        with pytest.raises(TopologyError, match="duplicate"):
            build_topology(config)

    def test_link_to_undefined_node_rejected(self):
        config = {
            "nodes": [{"id": "OVS1", "kind": "edge"}],
            "links": [{"a": "OVS1", "b": "GHOST"}],
        }
        with pytest.raises(TopologyError, match="undefined"):
            build_topology(config)

    def test_slice_outside_vlan_range_rejected(self):
        config = {"nodes": [], "slices": [{"vlan": 5000, "name": "bad", "hosts": []}]}
        with pytest.raises(TopologyError, match="VLAN"):
            build_topology(config)


class TestInjectPacket:
    def test_first_packet_punts_and_emits_header_event(self):
        fabric = build_topology(small_topology())
        trace = inject_packet(fabric, ue_packet(), ingress=("OVS1", 1))
        assert trace.outcome == Punted(node="OVS1")
        assert len(fabric.punt_events) == 1
        punt = fabric.punt_events[0]
        assert punt.header.src_ip == "10.0.0.1"
        assert punt.header.flow_id == "78b34x"
        # only the header travels to the controller
        assert not hasattr(punt.header, "payload")

    def test_installed_forward_rules_deliver_with_slice_tag(self):
        fabric = build_topology(small_topology())
        match = FlowKey(src_ip="10.0.0.1", dst_ip="10.0.0.8")
        apply_flow_mod(
            fabric, "OVS1",
            FlowMod.add(FlowRule("r1", match, Forward(port=2, slice_id=200), priority=10)),
        )
        apply_flow_mod(
            fabric, "CORE1",
            FlowMod.add(FlowRule("r2", match, Forward(port=2, slice_id=200), priority=10)),
        )
        trace = inject_packet(fabric, ue_packet(), ingress=("OVS1", 1))
        assert trace.outcome == Delivered(host="SVC1")
        links = trace.link_events()
        assert len(links) == 2
        assert all(e.detail["slice_id"] == 200 for e in links)

    def test_drop_rule_stops_packet_with_no_downstream_hops(self):
        fabric = build_topology(small_topology())
        apply_flow_mod(
            fabric, "OVS1",
            FlowMod.add(FlowRule("deny", FlowKey(src_ip="10.0.0.1"), Drop(), priority=20)),
        )
        trace = inject_packet(fabric, ue_packet(), ingress=("OVS1", 1))
        assert trace.outcome == Dropped(node="OVS1", reason="drop-rule:deny")
        assert trace.link_events() == []

    def test_unknown_ingress_node_raises(self):
        fabric = build_topology(small_topology())
        with pytest.raises(UnknownNodeError):
            inject_packet(fabric, ue_packet(), ingress=("NOPE", 1))

    def test_slice_confinement_blocks_wrong_slice_delivery(self):
        # Forward tags slice 100, but SVC1 is only attached to slice 200.
        fabric = build_topology(small_topology())
        match = FlowKey(src_ip="10.0.0.1")
        apply_flow_mod(
            fabric, "OVS1",
            FlowMod.add(FlowRule("r1", match, Forward(port=2, slice_id=100), priority=10)),
        )
        apply_flow_mod(
            fabric, "CORE1",
            FlowMod.add(FlowRule("r2", match, Forward(port=2, slice_id=100), priority=10)),
        )
        trace = inject_packet(fabric, ue_packet(), ingress=("OVS1", 1))
        assert trace.outcome == Dropped(node="CORE1", reason="slice-violation")

    def test_no_matching_rule_at_core_is_an_explicit_drop(self):
        fabric = build_topology(small_topology())
        apply_flow_mod(
            fabric, "OVS1",
            FlowMod.add(
                FlowRule("r1", FlowKey(src_ip="10.0.0.1"), Forward(port=2, slice_id=200), priority=10)
            ),
        )
        trace = inject_packet(fabric, ue_packet(), ingress=("OVS1", 1))
        assert trace.outcome == Dropped(node="CORE1", reason="no-matching-rule")


class TestPriorityMatching:
    def _linear_scan_oracle(self, rules, packet):
        """Brute force: scan every rule, keep the best (priority, rule_id) match."""
        best = None
        for rule in rules:
            if rule.match.matches(packet):
                if best is None or (-rule.priority, rule.rule_id) < (-best.priority, best.rule_id):
                    best = rule
        return best

    def test_lookup_agrees_with_linear_scan_on_random_tables(self):
        rng = random.Random(42)
        ips = [f"10.0.0.{i}" for i in range(1, 6)]
        macs = [f"00:09:00:{i:02X}" for i in range(4)]
        for _case in range(200):
            fabric = build_topology(
                {"nodes": [{"id": "SW", "kind": "core"}, {"id": "H", "kind": "host", "ip": "10.0.0.99"}],
                 "links": [{"a": "SW", "b": "H"}]}
            )
            n_rules = rng.randint(0, 100)
            for i in range(n_rules):
                match = FlowKey(
                    src_ip=rng.choice(ips + [None]),
                    dst_ip=rng.choice(ips + [None]),
                    src_mac=rng.choice(macs + [None]),
                    slice_id=rng.choice([None, 100, 200]),
                )
                rule = FlowRule(
                    rule_id=f"r{i:03d}",
                    match=match,
                    action=Drop(),
                    priority=rng.randint(0, 5),
                )
                apply_flow_mod(fabric, "SW", FlowMod.add(rule))
            packet = Packet(
                src_ip=rng.choice(ips),
                dst_ip=rng.choice(ips),
                src_mac=rng.choice(macs),
                dst_mac="ff",
                slice_id=rng.choice([None, 100, 200]),
            )
            chosen = fabric.nodes["SW"].table.lookup(packet)
            expected = self._linear_scan_oracle(fabric.nodes["SW"].table.rules(), packet)
            assert chosen == expected


class TestApplyFlowMod:
    def test_controller_rule_shows_in_report(self):
        fabric = build_topology(small_topology())
        rule = FlowRule("r1", FlowKey(src_ip="10.0.0.1"), Drop(), priority=7)
        delta = apply_flow_mod(fabric, "OVS1", FlowMod.add(rule), Provenance.CONTROLLER)
        assert [r.rule_id for r in delta.added] == ["r1"]
        report = report_flow_rules(fabric, "OVS1")
        assert "r1" in [r.rule_id for r in report.rules]

    def test_external_rule_lands_in_table_with_external_provenance(self):
        fabric = build_topology(small_topology())
        rule = FlowRule("atk", FlowKey(dst_ip="10.0.0.8"), Drop(), priority=50)
        apply_flow_mod(fabric, "OVS1", FlowMod.add(rule), Provenance.EXTERNAL)
        stored = {r.rule_id: r for r in fabric.nodes["OVS1"].table.rules()}
        assert stored["atk"].provenance == Provenance.EXTERNAL
        # ...but the switch report does not expose provenance at all
        report = report_flow_rules(fabric, "OVS1")
        atk = next(r for r in report.rules if r.rule_id == "atk")
        assert not hasattr(atk, "provenance")

    def test_add_with_same_match_and_priority_replaces(self):
        fabric = build_topology(small_topology())
        match = FlowKey(src_ip="10.0.0.1")
        apply_flow_mod(fabric, "OVS1", FlowMod.add(FlowRule("old", match, Drop(), priority=9)))
        delta = apply_flow_mod(
            fabric, "OVS1",
            FlowMod.add(FlowRule("new", match, Forward(port=2, slice_id=200), priority=9)),
        )
        assert [r.rule_id for r in delta.removed] == ["old"]
        ids = [r.rule_id for r in fabric.nodes["OVS1"].table.rules()]
        assert "new" in ids and "old" not in ids

    def test_delete_unknown_rule_is_warning_noop(self):
        fabric = build_topology(small_topology())
        delta = apply_flow_mod(fabric, "OVS1", FlowMod.delete("zzz"))
        assert delta.warning is True
        assert delta.added == () and delta.removed == ()


class TestReports:
    def test_rules_ordered_by_priority_then_id(self):
        fabric = build_topology(small_topology())
        apply_flow_mod(fabric, "CORE1", FlowMod.add(FlowRule("b", FlowKey(), Drop(), priority=5)))
        apply_flow_mod(fabric, "CORE1", FlowMod.add(FlowRule("a", FlowKey(dst_ip="x"), Drop(), priority=10)))
        report = report_flow_rules(fabric, "CORE1")
        assert [r.rule_id for r in report.rules] == ["a", "b"]

    def test_empty_table_reports_empty(self):
        fabric = build_topology(small_topology())
        assert report_flow_rules(fabric, "CORE1").rules == ()

    def test_reports_are_byte_identical_without_mods(self):
        fabric = build_topology(small_topology())
        apply_flow_mod(fabric, "OVS1", FlowMod.add(FlowRule("x", FlowKey(), Drop(), priority=3)))
        first = report_flow_rules(fabric, "OVS1").to_json()
        second = report_flow_rules(fabric, "OVS1").to_json()
        assert first == second


class TestAttestation:
    def test_untampered_measurement_matches_expected(self):
        fabric = build_topology(small_topology())
        nonce = bytes(range(16))
        report = measure_attestation(fabric, "SVC1", nonce)
        assert report.measured_hash == fabric.nodes["SVC1"].expected_hash
        assert report.nonce == nonce

    def test_tampered_node_measures_differently(self):
        fabric = build_topology(small_topology())
        fabric.set_tampered("SVC1", True)
        report = measure_attestation(fabric, "SVC1", bytes(16))
        assert report.measured_hash != fabric.nodes["SVC1"].expected_hash

    def test_nonce_varies_but_measurement_does_not(self):
        fabric = build_topology(small_topology())
        r1 = measure_attestation(fabric, "SVC1", b"A" * 16)
        r2 = measure_attestation(fabric, "SVC1", b"B" * 16)
        assert r1.measured_hash == r2.measured_hash
        assert r1.nonce != r2.nonce

    def test_unknown_node_raises(self):
        fabric = build_topology(small_topology())
        with pytest.raises(UnknownNodeError):
            measure_attestation(fabric, "GHOST", bytes(16))
