"""Controller-hosted security manager.

One logical authority per domain: it reacts to punted first packets by
extracting the user's profile, composing slice-access and flow-validation
instances for all of that user's devices, deploying them at the edge, and
installing flow rules along the slice path.  It also reacts to alerts by
blacklisting devices, gates service deployment on attestation, provisions
per-flow encryption keys, audits switch state against the activity log, and
hands authorizations over between edges when a device moves.

5G core functions between the gNodeB and the controller are modeled as a
fixed number of message hops that cost virtual time, nothing more.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import policy as pol
from . import security_functions as sf
from .fabric import (
    Fabric,
    FlowKey,
    FlowMod,
    FlowRule,
    Forward,
    Drop,
    IngressDecision,
    NodeKind,
    Packet,
    Provenance,
    PuntEvent,
    TraceEvent,
    apply_flow_mod,
    measure_attestation,
    report_flow_rules,
)


class UnknownDeviceError(KeyError):
    """Raised when an operation names a device with no state at that edge."""


class ProvisioningError(Exception):
    """Raised when flow security cannot be provisioned."""


@dataclass
class ManagerConfig:
    generic_slice: int = 4094
    anomaly_window_ms: int = sf.DEFAULT_ANOMALY_WINDOW_MS
    anomaly_threshold: int = sf.DEFAULT_ANOMALY_THRESHOLD
    audit_interval_ms: int = 1000
    security_enabled: bool = True
    # virtual-time cost model, microseconds
    dispatch_hops: int = 2
    hop_cost_us: int = 1000
    profile_extract_us: int = 150
    compose_us: int = 100
    deploy_us: int = 50
    access_check_us: int = 20
    flow_validation_base_us: int = 20
    signature_scan_us: int = 10
    path_compute_us: int = 2500
    rule_install_us: int = 500

    def dispatch_us(self) -> int:
        return self.dispatch_hops * self.hop_cost_us


@dataclass
class SecurityDeployment:
    """The bundle of security function instances pinned to one edge node."""

    node: str
    access: sf.SliceAccessState
    validator: sf.FlowValidatorState
    secured_flows: dict[str, str] = field(default_factory=dict)  # flow_id -> key_id
    encryption_enabled: bool = False
    deployed_at: int = 0
    covered_users: set[str] = field(default_factory=set)


@dataclass
class FlowRecord:
    flow_id: str
    device_id: str
    user_id: Optional[str]
    src_ip: str
    dst_ip: str
    slice_id: int
    service: str
    security_reqs: frozenset[str]
    edge: str
    ingress_port: int
    path: tuple[str, ...]
    rules: list[tuple[str, str]] = field(default_factory=list)  # (node, rule_id)
    key_id: Optional[str] = None


@dataclass
class FlowDecision:
    flow_id: str
    device_id: str
    verdict: str  # "permitted" | "generic" | "deny-unauthorized" | "deny-blacklisted" | "error"
    slice_id: Optional[int] = None
    service: Optional[str] = None
    installed_rules: list[tuple[str, str]] = field(default_factory=list)
    extraction_performed: bool = False
    cost_us: int = 0
    error: Optional[str] = None


@dataclass
class ReconfigAction:
    kind: str  # "blacklisted" | "noop" | "admin-alert" | "restored"
    device_id: Optional[str] = None
    node: Optional[str] = None
    rules_replaced: int = 0


@dataclass
class DeployResult:
    host: str
    service: str
    deployed: bool
    verdict: sf.TrustVerdict


@dataclass
class HandoverResult:
    device_id: str
    from_edge: str
    to_edge: str
    moved_pairs: frozenset[tuple[int, str]]
    blacklisted: bool
    rules_reanchored: int


class IngressProcessor:
    """Datapath hook: slice access check, then flow validation, then on to
    the table (encryption is applied by the fabric as the packet leaves)."""

    def __init__(self, manager: "SecurityManager", deployment: SecurityDeployment) -> None:
        self._manager = manager
        self.deployment = deployment

    def process(self, packet: Packet) -> IngressDecision:
        mgr = self._manager
        cfg = mgr.config
        dep = self.deployment
        events: list[TraceEvent] = []
        cost = cfg.access_check_us

        requested = mgr.requested_pair(packet.dst_ip)
        verdict = sf.check_slice_access(dep.access, packet, requested)
        events.append(
            TraceEvent(
                kind="slice-access",
                node=dep.node,
                time_ms=packet.virtual_timestamp,
                detail={"verdict": verdict.value, "device": packet.src_mac},
            )
        )
        if verdict in (sf.AccessVerdict.DENY_UNAUTHORIZED, sf.AccessVerdict.DENY_BLACKLISTED):
            mgr.log_access_denied(dep.node, packet.src_mac, packet.flow_id, verdict.value)
            return IngressDecision(allow=False, reason=verdict.value, events=events, cost_us=cost)

        result = sf.validate_flow(dep.validator, packet)
        cost += cfg.flow_validation_base_us + result.signatures_scanned * cfg.signature_scan_us
        events.append(
            TraceEvent(
                kind="flow-validation",
                node=dep.node,
                time_ms=packet.virtual_timestamp,
                detail={
                    "verdict": type(result.verdict).__name__,
                    "signatures_scanned": result.signatures_scanned,
                },
            )
        )
        if result.alert is not None:
            mgr.record_alert(result.alert)
        if isinstance(result.verdict, sf.FlowDropSignature):
            return IngressDecision(
                allow=False, reason=f"signature:{result.verdict.sig_id}", events=events, cost_us=cost
            )
        if isinstance(result.verdict, sf.FlowDropAnomaly):
            return IngressDecision(allow=False, reason="anomaly", events=events, cost_us=cost)
        return IngressDecision(allow=True, events=events, cost_us=cost)


class SecurityManager:
    """Single serialized security authority over one fabric."""

    def __init__(
        self,
        fabric: Fabric,
        repository: pol.PolicyRepository,
        activity_log: Optional[pol.ActivityLog] = None,
        signatures: Optional[list[sf.Signature]] = None,
        config: Optional[ManagerConfig] = None,
        seed: int = 0,
    ) -> None:
        self.fabric = fabric
        self.repository = repository
        self.log = activity_log if activity_log is not None else pol.ActivityLog()
        self.signatures = list(signatures or [])
        self.config = config or ManagerConfig()
        self.deployments: dict[str, SecurityDeployment] = {}
        self.flows: dict[str, FlowRecord] = {}
        self.global_blacklist: set[str] = set()
        self.deployed_services: set[tuple[str, str]] = set()
        self.admin_alerts: list[dict] = []
        self.pending_alerts: list[sf.Alert] = []
        self.event_sink: Optional[Callable[[dict], None]] = None
        self.keygen = sf.KeyGenerator(seed)
        self._rng = random.Random(seed)
        self._rule_counter = 0
        self._denial_logged: set[tuple[str, str]] = set()
        self._last_audit_ms = 0
        self._adopt_boot_state()

    # -- bootstrap -----------------------------------------------------------

    def _adopt_boot_state(self) -> None:
        # Record the boot-time tables so a clean switch audits clean.
        for node_id in sorted(self.fabric.nodes):
            node = self.fabric.nodes[node_id]
            if node.kind == NodeKind.HOST:
                continue
            for rule in sorted(node.table.rules(), key=lambda r: r.rule_id):
                self.log.append(
                    {
                        "type": pol.EV_RULE_INSTALLED,
                        "node": node_id,
                        "rule": rule.reported().to_dict(),
                        "time_ms": 0,
                    }
                )

    # -- small helpers --------------------------------------------------------

    def _emit(self, event: dict) -> None:
        if self.event_sink is not None:
            self.event_sink(event)

    def _admin_alert(self, kind: str, detail: dict) -> None:
        record = {"kind": kind, "time_ms": self.fabric.clock_ms, **detail}
        self.admin_alerts.append(record)
        self._emit({"event": "admin-alert", **record})

    def _next_rule_id(self) -> str:
        self._rule_counter += 1
        return f"fl-{self._rule_counter:06d}"

    def requested_pair(self, dst_ip: str) -> tuple[int, str]:
        """What (slice, service) a destination stands for; generic if unknown."""
        found = self.repository.service_at(dst_ip)
        if found is not None:
            return found
        return (self.config.generic_slice, "generic")

    def record_alert(self, alert: sf.Alert) -> None:
        """Log an alert into the activity log and queue it for handling."""
        self.log.append({"type": pol.EV_ALERT_RAISED, "node": None, **alert.to_dict()})
        self.pending_alerts.append(alert)
        self._emit({"event": "alert", **alert.to_dict()})

    def log_access_denied(self, node: str, device_id: str, flow_id: str, reason: str) -> None:
        # One log entry per (device, flow): floods must not balloon the log.
        key = (device_id, flow_id)
        if key in self._denial_logged:
            return
        self._denial_logged.add(key)
        self.log.append(
            {
                "type": pol.EV_ACCESS_DENIED,
                "node": node,
                "device_id": device_id,
                "flow_id": flow_id,
                "reason": reason,
                "time_ms": self.fabric.clock_ms,
            }
        )

    # -- rule installation -----------------------------------------------------

    def _install_rule(self, node: str, rule: FlowRule, time_ms: int) -> None:
        apply_flow_mod(self.fabric, node, FlowMod.add(rule), Provenance.CONTROLLER)
        self.log.append(
            {
                "type": pol.EV_RULE_INSTALLED,
                "node": node,
                "rule": rule.reported().to_dict(),
                "time_ms": time_ms,
            }
        )

    def _delete_rule(self, node: str, rule_id: str, time_ms: int) -> None:
        apply_flow_mod(self.fabric, node, FlowMod.delete(rule_id), Provenance.CONTROLLER)
        self.log.append(
            {"type": pol.EV_RULE_DELETED, "node": node, "rule_id": rule_id, "time_ms": time_ms}
        )

    def _install_path_rules(
        self,
        record: FlowRecord,
        priority: int = 10,
    ) -> int:
        """Install bidirectional forwarding rules along the record's path."""
        fabric = self.fabric
        path = record.path
        time_ms = fabric.clock_ms
        installed = 0
        forward_key = FlowKey(src_ip=record.src_ip, dst_ip=record.dst_ip)
        reverse_key = FlowKey(src_ip=record.dst_ip, dst_ip=record.src_ip)
        for i, node in enumerate(path[:-1]):
            next_node = path[i + 1]
            port = fabric.port_toward(node, next_node)
            if port is None:
                continue
            rule = FlowRule(
                rule_id=self._next_rule_id(),
                match=forward_key,
                action=Forward(port=port, slice_id=record.slice_id),
                priority=priority,
            )
            self._install_rule(node, rule, time_ms)
            record.rules.append((node, rule.rule_id))
            installed += 1
            # Reverse direction: deliver back toward the device.
            if i == 0:
                back_port = record.ingress_port
            else:
                back_port = fabric.port_toward(node, path[i - 1])
            if back_port is not None:
                back = FlowRule(
                    rule_id=self._next_rule_id(),
                    match=reverse_key,
                    action=Forward(port=back_port, slice_id=record.slice_id),
                    priority=priority,
                )
                self._install_rule(node, back, time_ms)
                record.rules.append((node, back.rule_id))
                installed += 1
        return installed

    # -- deployment composition --------------------------------------------------

    def compose_deployment(
        self, profile: Optional[pol.SecurityProfile], node: str
    ) -> SecurityDeployment:
        """Build (or extend) the security deployment for an edge node.

        The whole profile goes in: every device of the user, every slice and
        service those devices are subscribed to.  An empty profile yields a
        generic-only deployment.
        """
        dep = self.deployments.get(node)
        if dep is None:
            dep = SecurityDeployment(
                node=node,
                access=sf.SliceAccessState(
                    node=node,
                    generic_slice=self.config.generic_slice,
                    blacklist=set(self.global_blacklist),
                ),
                validator=sf.FlowValidatorState(
                    node=node,
                    signatures=list(self.signatures),
                    window_ms=self.config.anomaly_window_ms,
                    threshold=self.config.anomaly_threshold,
                ),
                deployed_at=self.fabric.clock_ms,
            )
        if profile is not None:
            for device in sorted(profile.device_ids()):
                pairs = dep.access.allowed.setdefault(device, set())
                pairs.update(profile.allowed_pairs(device))
            if profile.requires_confidentiality():
                dep.encryption_enabled = True
            dep.covered_users.add(profile.user_id)
        return dep

    def _deploy(self, dep: SecurityDeployment) -> None:
        self.deployments[dep.node] = dep
        self.fabric.set_ingress_processor(dep.node, IngressProcessor(self, dep))
        self.log.append(
            {
                "type": pol.EV_FUNCTIONS_DEPLOYED,
                "node": dep.node,
                "covered_users": sorted(dep.covered_users),
                "devices": sorted(dep.access.allowed),
                "time_ms": self.fabric.clock_ms,
            }
        )

    # -- command API ---------------------------------------------------------

    def new_flow(self, punt: PuntEvent) -> FlowDecision:
        """Handle a punted first packet end to end.

        Profile extraction runs at most once per user per edge; a second
        device of an already-covered user is decided locally from the edge
        deployment without touching the repository.
        """
        cfg = self.config
        header = punt.header
        device = header.src_mac
        cost = cfg.dispatch_us()
        flow_id = header.flow_id or f"{header.src_ip}->{header.dst_ip}"

        if not cfg.security_enabled:
            return self._new_flow_plain(punt, flow_id, cost)

        dep = self.deployments.get(punt.node)
        user_id = self.repository.user_of_device(device)
        extraction = False
        if user_id is not None and (dep is None or user_id not in dep.covered_users):
            profile = pol.extract_profile(self.repository, user_id)
            self.log.append(
                {
                    "type": pol.EV_PROFILE_EXTRACTED,
                    "node": punt.node,
                    "user_id": user_id,
                    "time_ms": self.fabric.clock_ms,
                }
            )
            extraction = True
            cost += cfg.profile_extract_us
            dep = self.compose_deployment(profile, punt.node)
            cost += cfg.compose_us + cfg.deploy_us
            self._deploy(dep)
        elif dep is None:
            # No registered user behind this punt: deploy a generic-only bundle
            # so the edge can police and rate-cap guest traffic.
            dep = self.compose_deployment(None, punt.node)
            cost += cfg.compose_us + cfg.deploy_us
            self._deploy(dep)

        requested = self.requested_pair(header.dst_ip)
        probe = Packet(
            src_ip=header.src_ip,
            dst_ip=header.dst_ip,
            src_mac=header.src_mac,
            dst_mac=header.dst_mac,
            flow_id=flow_id,
            slice_id=header.slice_id,
            virtual_timestamp=header.virtual_timestamp,
        )
        verdict = sf.check_slice_access(dep.access, probe, requested)
        cost += cfg.access_check_us

        if verdict == sf.AccessVerdict.DENY_BLACKLISTED or device in self.global_blacklist:
            self.log_access_denied(punt.node, device, flow_id, "deny-blacklisted")
            return FlowDecision(
                flow_id=flow_id, device_id=device, verdict="deny-blacklisted",
                extraction_performed=extraction, cost_us=cost,
            )
        if verdict == sf.AccessVerdict.DENY_UNAUTHORIZED:
            self.log_access_denied(punt.node, device, flow_id, "deny-unauthorized")
            return FlowDecision(
                flow_id=flow_id, device_id=device, verdict="deny-unauthorized",
                extraction_performed=extraction, cost_us=cost,
            )

        # Header-scope validation before any rules go in.
        result = sf.validate_flow(dep.validator, probe, headers_only=True)
        cost += cfg.flow_validation_base_us + result.signatures_scanned * cfg.signature_scan_us
        if result.alert is not None:
            self.record_alert(result.alert)
        if not isinstance(result.verdict, sf.FlowForward):
            reason = (
                f"signature:{result.verdict.sig_id}"
                if isinstance(result.verdict, sf.FlowDropSignature)
                else "anomaly"
            )
            self.log_access_denied(punt.node, device, flow_id, reason)
            return FlowDecision(
                flow_id=flow_id, device_id=device, verdict="deny-validation",
                extraction_performed=extraction, cost_us=cost, error=reason,
            )

        if verdict == sf.AccessVerdict.PERMIT:
            slice_id, service = requested
            reqs = self.repository.security_reqs(device, requested)
            dst_ip = header.dst_ip
            final_verdict = "permitted"
        else:  # ROUTE_GENERIC
            slice_id = self.config.generic_slice
            service = "generic"
            reqs = frozenset()
            dst_ip = self._generic_host_ip() or header.dst_ip
            final_verdict = "generic"

        dst_node = self.fabric.host_by_ip(dst_ip)
        if dst_node is None:
            return FlowDecision(
                flow_id=flow_id, device_id=device, verdict="error",
                extraction_performed=extraction, cost_us=cost,
                error=f"no host for destination {dst_ip}",
            )
        path = self.fabric.shortest_path(punt.node, dst_node)
        cost += cfg.path_compute_us
        if path is None:
            return FlowDecision(
                flow_id=flow_id, device_id=device, verdict="error",
                extraction_performed=extraction, cost_us=cost,
                error=f"no route from {punt.node} to {dst_node}",
            )
        record = FlowRecord(
            flow_id=flow_id,
            device_id=device,
            user_id=user_id,
            src_ip=header.src_ip,
            dst_ip=header.dst_ip,
            slice_id=slice_id,
            service=service,
            security_reqs=reqs,
            edge=punt.node,
            ingress_port=punt.port,
            path=tuple(path),
        )
        installed = self._install_path_rules(record)
        cost += installed * cfg.rule_install_us
        self.flows[flow_id] = record
        return FlowDecision(
            flow_id=flow_id, device_id=device, verdict=final_verdict,
            slice_id=slice_id, service=service, installed_rules=list(record.rules),
            extraction_performed=extraction, cost_us=cost,
        )

    def _new_flow_plain(self, punt: PuntEvent, flow_id: str, cost: int) -> FlowDecision:
        """Baseline reactive forwarding: no security functions at all."""
        cfg = self.config
        header = punt.header
        requested = self.repository.service_at(header.dst_ip)
        slice_id = requested[0] if requested else self.config.generic_slice
        service = requested[1] if requested else "generic"
        dst_node = self.fabric.host_by_ip(header.dst_ip)
        if dst_node is None:
            return FlowDecision(
                flow_id=flow_id, device_id=header.src_mac, verdict="error",
                cost_us=cost, error=f"no host for destination {header.dst_ip}",
            )
        path = self.fabric.shortest_path(punt.node, dst_node)
        cost += cfg.path_compute_us
        if path is None:
            return FlowDecision(
                flow_id=flow_id, device_id=header.src_mac, verdict="error",
                cost_us=cost, error="no route",
            )
        record = FlowRecord(
            flow_id=flow_id, device_id=header.src_mac, user_id=None,
            src_ip=header.src_ip, dst_ip=header.dst_ip, slice_id=slice_id,
            service=service, security_reqs=frozenset(), edge=punt.node,
            ingress_port=punt.port, path=tuple(path),
        )
        installed = self._install_path_rules(record)
        cost += installed * cfg.rule_install_us
        self.flows[flow_id] = record
        return FlowDecision(
            flow_id=flow_id, device_id=header.src_mac, verdict="permitted",
            slice_id=slice_id, service=service, installed_rules=list(record.rules),
            cost_us=cost,
        )

    def _generic_host_ip(self) -> Optional[str]:
        generic = self.fabric.slices.get(self.config.generic_slice)
        if generic is None:
            return None
        for host in sorted(generic.hosts):
            node = self.fabric.nodes.get(host)
            if node is not None and node.kind == NodeKind.HOST and node.ip:
                return node.ip
        return None

    def alert(self, alert: sf.Alert) -> ReconfigAction:
        """React to a raised alert: blacklist the device at slice entry and
        replace its flow rules with drops.  Idempotent per device."""
        device = alert.device_id
        known = (
            self.repository.device_known(device)
            or any(device in d.access.allowed for d in self.deployments.values())
            or any(r.device_id == device for r in self.flows.values())
        )
        if not known:
            self._admin_alert("unknown-device-alert", {"device_id": device, "reason": alert.reason})
            return ReconfigAction(kind="admin-alert", device_id=device)
        if device in self.global_blacklist:
            return ReconfigAction(kind="noop", device_id=device)

        self.global_blacklist.add(device)
        for dep in self.deployments.values():
            dep.access.blacklist.add(device)
        self.log.append(
            {
                "type": pol.EV_DEVICE_BLACKLISTED,
                "node": None,
                "device_id": device,
                "reason": alert.reason,
                "time_ms": self.fabric.clock_ms,
            }
        )
        replaced = 0
        for record in self.flows.values():
            if record.device_id != device:
                continue
            for node, rule_id in record.rules:
                self._delete_rule(node, rule_id, self.fabric.clock_ms)
                replaced += 1
            record.rules.clear()
            drop = FlowRule(
                rule_id=self._next_rule_id(),
                match=FlowKey(src_ip=record.src_ip, dst_ip=record.dst_ip),
                action=Drop(),
                priority=100,
            )
            self._install_rule(record.edge, drop, self.fabric.clock_ms)
            record.rules.append((record.edge, drop.rule_id))
        return ReconfigAction(
            kind="blacklisted", device_id=device, rules_replaced=replaced
        )

    def tick(self, now_ms: int) -> list[sf.AuditResult]:
        """Periodic duties: audit every switch once per audit interval."""
        if now_ms - self._last_audit_ms < self.config.audit_interval_ms:
            return []
        self._last_audit_ms = now_ms
        results = []
        for node_id in sorted(self.fabric.nodes):
            if self.fabric.nodes[node_id].kind != NodeKind.HOST:
                results.append(self.audit_now(node_id))
        return results

    def audit_now(self, node_id: str) -> sf.AuditResult:
        """Compare the switch's reported rules with the log-derived trusted
        state; on any variation alert the administrator and restore."""
        observed = report_flow_rules(self.fabric, node_id)
        trusted = self.log.expected_switch_state(node_id)
        result = sf.audit_flow_rules(trusted, observed)
        self.log.append(
            {
                "type": pol.EV_AUDIT_PERFORMED,
                "node": node_id,
                "clean": result.clean,
                "extra": [r.rule_id for r in result.extra_rules],
                "missing": [r.rule_id for r in result.missing_rules],
                "modified": [e.rule_id for e, _o in result.modified_rules],
                "time_ms": self.fabric.clock_ms,
            }
        )
        if not result.clean:
            diff = sf.render_audit_diff(trusted, observed)
            self._admin_alert(
                "switch-state-mismatch",
                {
                    "node": node_id,
                    "extra": [r.rule_id for r in result.extra_rules],
                    "missing": [r.rule_id for r in result.missing_rules],
                    "modified": [e.rule_id for e, _o in result.modified_rules],
                    "diff": diff,
                },
            )
            self._restore(node_id, result)
        return result

    def _restore(self, node_id: str, result: sf.AuditResult) -> None:
        # Converge the switch back to the trusted state.  These are physical
        # corrections, not policy changes, so the trusted state itself (the
        # install/delete history) is left untouched.
        for rule in result.extra_rules:
            apply_flow_mod(self.fabric, node_id, FlowMod.delete(rule.rule_id), Provenance.CONTROLLER)
        for rule in result.missing_rules:
            apply_flow_mod(
                self.fabric,
                node_id,
                FlowMod.add(
                    FlowRule(
                        rule_id=rule.rule_id, match=rule.match,
                        action=rule.action, priority=rule.priority,
                    )
                ),
                Provenance.CONTROLLER,
            )
        for expected, _observed in result.modified_rules:
            apply_flow_mod(
                self.fabric,
                node_id,
                FlowMod.add(
                    FlowRule(
                        rule_id=expected.rule_id, match=expected.match,
                        action=expected.action, priority=expected.priority,
                    )
                ),
                Provenance.CONTROLLER,
            )
        self.log.append(
            {
                "type": pol.EV_CORRECTIVE_ACTION,
                "node": node_id,
                "deleted": [r.rule_id for r in result.extra_rules],
                "reinstalled": sorted(
                    [r.rule_id for r in result.missing_rules]
                    + [e.rule_id for e, _o in result.modified_rules]
                ),
                "time_ms": self.fabric.clock_ms,
            }
        )

    def deploy_service_gated(self, host: str, service: str) -> DeployResult:
        """Attest a host with a fresh nonce; deploy the service only if the
        measured state matches the expected one."""
        node = self.fabric.node(host)
        nonce = self._rng.randbytes(16)
        report = measure_attestation(self.fabric, host, nonce)
        verdict = sf.validate_attestation(node.expected_hash, report, nonce)
        if verdict == sf.TrustVerdict.TRUSTED:
            self.deployed_services.add((host, service))
            self.log.append(
                {
                    "type": pol.EV_SERVICE_DEPLOYED,
                    "node": host,
                    "service": service,
                    "time_ms": self.fabric.clock_ms,
                }
            )
            return DeployResult(host=host, service=service, deployed=True, verdict=verdict)
        self.log.append(
            {
                "type": pol.EV_SERVICE_REFUSED,
                "node": host,
                "service": service,
                "verdict": verdict.value,
                "time_ms": self.fabric.clock_ms,
            }
        )
        self._admin_alert(
            "service-deployment-refused",
            {"node": host, "service": service, "verdict": verdict.value},
        )
        return DeployResult(host=host, service=service, deployed=False, verdict=verdict)

    def attest_node(self, node_id: str) -> sf.TrustVerdict:
        node = self.fabric.node(node_id)
        nonce = self._rng.randbytes(16)
        report = measure_attestation(self.fabric, node_id, nonce)
        return sf.validate_attestation(node.expected_hash, report, nonce)

    def handover(self, device_id: str, from_edge: str, to_edge: str) -> HandoverResult:
        """Move a device's authorizations from one edge to another.

        Entries are copied, never re-extracted: the repository is not
        consulted and no profile extraction event appears in the log.
        """
        self.fabric.node(to_edge)
        from_dep = self.deployments.get(from_edge)
        if from_dep is None or (
            device_id not in from_dep.access.allowed
            and device_id not in from_dep.access.blacklist
        ):
            raise UnknownDeviceError(f"device {device_id!r} has no state at {from_edge!r}")

        to_dep = self.deployments.get(to_edge)
        if to_dep is None:
            to_dep = self.compose_deployment(None, to_edge)
            self._deploy(to_dep)
        pairs = frozenset(from_dep.access.allowed.get(device_id, set()))
        if device_id in from_dep.access.allowed:
            to_dep.access.allowed[device_id] = set(pairs)
        blacklisted = device_id in from_dep.access.blacklist
        if blacklisted:
            to_dep.access.blacklist.add(device_id)
        window = from_dep.validator.windows.get(device_id)
        if window is not None:
            to_dep.validator.windows[device_id] = window.copy()

        reanchored = 0
        for record in self.flows.values():
            if record.device_id != device_id or record.edge != from_edge:
                continue
            for node, rule_id in record.rules:
                self._delete_rule(node, rule_id, self.fabric.clock_ms)
            record.rules.clear()
            if blacklisted:
                # Carry the containment, not the connectivity.
                drop = FlowRule(
                    rule_id=self._next_rule_id(),
                    match=FlowKey(src_ip=record.src_ip, dst_ip=record.dst_ip),
                    action=Drop(),
                    priority=100,
                )
                self._install_rule(to_edge, drop, self.fabric.clock_ms)
                record.edge = to_edge
                record.rules.append((to_edge, drop.rule_id))
                continue
            dst_node = self.fabric.host_by_ip(record.dst_ip)
            src_node = self.fabric.host_by_ip(record.src_ip)
            new_port = (
                self.fabric.port_toward(to_edge, src_node) if src_node is not None else None
            )
            path = self.fabric.shortest_path(to_edge, dst_node) if dst_node else None
            if path is None or new_port is None:
                continue
            record.edge = to_edge
            record.ingress_port = new_port
            record.path = tuple(path)
            reanchored += self._install_path_rules(record)
        self.log.append(
            {
                "type": pol.EV_HANDOVER,
                "node": to_edge,
                "device_id": device_id,
                "from": from_edge,
                "to": to_edge,
                "time_ms": self.fabric.clock_ms,
            }
        )
        return HandoverResult(
            device_id=device_id,
            from_edge=from_edge,
            to_edge=to_edge,
            moved_pairs=pairs,
            blacklisted=blacklisted,
            rules_reanchored=reanchored,
        )

    def provision_security(self, flow_id: str) -> str:
        """Generate and distribute a per-flow key; encrypt at the ingress
        edge, decrypt at the component attached to the destination."""
        record = self.flows.get(flow_id)
        if record is None:
            raise ValueError(f"unknown flow {flow_id!r}")
        if "confidentiality" not in record.security_reqs:
            raise ValueError(
                f"flow {flow_id!r} service {record.service!r} does not require confidentiality"
            )
        ingress = record.edge
        egress = record.path[-2] if len(record.path) >= 2 else record.edge
        if ingress == egress:
            raise ProvisioningError(
                f"flow {flow_id!r} enters and exits at {ingress!r}; nothing to secure"
            )
        for endpoint in (ingress, egress):
            verdict = self.attest_node(endpoint)
            if verdict != sf.TrustVerdict.TRUSTED:
                self._admin_alert(
                    "provisioning-refused",
                    {"flow_id": flow_id, "node": endpoint, "verdict": verdict.value},
                )
                raise ProvisioningError(
                    f"endpoint {endpoint!r} failed attestation ({verdict.value})"
                )
        key = self.keygen.generate((ingress, egress), created_at=self.fabric.clock_ms)
        self.log.append(
            {
                "type": pol.EV_KEY_GENERATED,
                "node": None,
                "key_id": key.key_id,
                "endpoints": [ingress, egress],
                "time_ms": self.fabric.clock_ms,
            }
        )
        self.fabric.set_flow_cipher(ingress, flow_id, "encrypt", sf.FlowCipher(key))
        self.fabric.set_flow_cipher(egress, flow_id, "decrypt", sf.FlowCipher(key))
        for endpoint in (ingress, egress):
            self.log.append(
                {
                    "type": pol.EV_KEY_DISTRIBUTED,
                    "node": endpoint,
                    "key_id": key.key_id,
                    "time_ms": self.fabric.clock_ms,
                }
            )
        record.key_id = key.key_id
        dep = self.deployments.get(ingress)
        if dep is not None:
            dep.secured_flows[flow_id] = key.key_id
        return key.key_id
