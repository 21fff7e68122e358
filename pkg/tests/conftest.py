"""Shared fixtures: worlds built from the bundled configuration files."""

import json
from importlib import resources

import pytest

from slice_sentinel.controller import ManagerConfig, SecurityManager
from slice_sentinel.fabric import build_topology, inject_packet, Punted
from slice_sentinel.policy import load_policies
from slice_sentinel.security_functions import parse_signatures


def _load_config(name: str):
    ref = resources.files("slice_sentinel.configs").joinpath(name)
    return json.loads(ref.read_text(encoding="utf-8"))


@pytest.fixture
def topology_doc():
    return _load_config("topology.json")


@pytest.fixture
def handover_topology_doc():
    return _load_config("topology_handover.json")


@pytest.fixture
def policy_doc():
    return _load_config("policies.json")


@pytest.fixture
def signature_doc():
    return _load_config("signatures.json")


@pytest.fixture
def world(topology_doc, policy_doc, signature_doc):
    fabric = build_topology(topology_doc)
    repo = load_policies(policy_doc)
    manager = SecurityManager(
        fabric,
        repo,
        signatures=parse_signatures(signature_doc),
        config=ManagerConfig(),
        seed=0,
    )
    return fabric, repo, manager


@pytest.fixture
def handover_world(handover_topology_doc, policy_doc, signature_doc):
    fabric = build_topology(handover_topology_doc)
    repo = load_policies(policy_doc)
    manager = SecurityManager(
        fabric,
        repo,
        signatures=parse_signatures(signature_doc),
        config=ManagerConfig(),
        seed=0,
    )
    return fabric, repo, manager


def drive(fabric, manager, packet, ingress, feedback=True):
    """Inject a packet, let the manager handle any punt, re-inject once.

    Mirrors what the scenario harness does; returns the final trace plus the
    flow decision if the controller was consulted.
    """
    trace = inject_packet(fabric, packet, ingress)
    decision = None
    while fabric.punt_events:
        punt = fabric.punt_events.popleft()
        decision = manager.new_flow(punt)
    if feedback:
        for alert in list(manager.pending_alerts):
            manager.alert(alert)
        manager.pending_alerts.clear()
    if isinstance(trace.outcome, Punted):
        trace = inject_packet(fabric, packet, ingress)
        if feedback:
            for alert in list(manager.pending_alerts):
                manager.alert(alert)
            manager.pending_alerts.clear()
    return trace, decision
