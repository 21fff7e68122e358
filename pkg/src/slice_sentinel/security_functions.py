"""The deployable security functions.

Each function here is a small, explicitly stated piece of state plus a pure
check: slice access control with blacklist precedence, signature and
rate-window flow validation, attestation verification, flow-rule audit
against a trusted report, symmetric key generation and authenticated flow
encryption, and per-device fingerprint/list checks.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .fabric import Packet, ReportedRule, SwitchStateReport
from .policy import TrustedReport

KEY_BYTES = 16
NONCE_BYTES = 12
ENVELOPE_MAGIC = b"FSE1"

DEFAULT_ANOMALY_WINDOW_MS = 1000
DEFAULT_ANOMALY_THRESHOLD = 100


# ---------------------------------------------------------------------------
# Slice access control
# ---------------------------------------------------------------------------

class AccessVerdict(Enum):
    PERMIT = "permit"
    DENY_UNAUTHORIZED = "deny-unauthorized"
    DENY_BLACKLISTED = "deny-blacklisted"
    ROUTE_GENERIC = "route-generic"


@dataclass
class SliceAccessState:
    """Per-node access control: which device may enter which (slice, service)."""

    node: str
    allowed: dict[str, set[tuple[int, str]]] = field(default_factory=dict)
    blacklist: set[str] = field(default_factory=set)
    generic_slice: int = 4094


def check_slice_access(
    state: SliceAccessState, packet: Packet, requested: tuple[int, str]
) -> AccessVerdict:
    """Decide whether a packet may enter the requested (slice, service).

    Blacklist wins over everything; unregistered devices are routed to the
    generic slice instead of being dropped.
    """
    device = packet.src_mac
    if device in state.blacklist:
        return AccessVerdict.DENY_BLACKLISTED
    pairs = state.allowed.get(device)
    if pairs is None:
        return AccessVerdict.ROUTE_GENERIC
    if requested in pairs:
        return AccessVerdict.PERMIT
    return AccessVerdict.DENY_UNAUTHORIZED


# ---------------------------------------------------------------------------
# Flow validation: signatures plus anomaly window
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Signature:
    sig_id: str
    pattern: bytes
    scope: str = "payload"  # "payload" | "header"


def parse_signatures(document: list) -> list[Signature]:
    sigs = []
    seen = set()
    for raw in document:
        sig_id = raw["id"]
        if sig_id in seen:
            raise ValueError(f"duplicate signature id {sig_id!r}")
        seen.add(sig_id)
        scope = raw.get("scope", "payload")
        if scope not in ("payload", "header"):
            raise ValueError(f"signature {sig_id!r}: unknown scope {scope!r}")
        sigs.append(Signature(sig_id=sig_id, pattern=bytes.fromhex(raw["pattern_hex"]), scope=scope))
    return sigs


def load_signatures(path) -> list[Signature]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_signatures(json.load(fh))


def packet_header_bytes(packet: Packet) -> bytes:
    return (
        f"{packet.src_ip}>{packet.dst_ip}|{packet.src_mac}>{packet.dst_mac}"
        f"|slice={packet.slice_id}|flow={packet.flow_id}"
    ).encode()


@dataclass(frozen=True)
class FlowForward:
    pass


@dataclass(frozen=True)
class FlowDropSignature:
    sig_id: str


@dataclass(frozen=True)
class FlowDropAnomaly:
    score: float


FlowVerdict = Union[FlowForward, FlowDropSignature, FlowDropAnomaly]


@dataclass(frozen=True)
class Alert:
    source: str
    device_id: str
    flow_id: str
    reason: str
    severity: str
    time_ms: int

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "device_id": self.device_id,
            "flow_id": self.flow_id,
            "reason": self.reason,
            "severity": self.severity,
            "time_ms": self.time_ms,
        }


@dataclass
class FlowValidationResult:
    verdict: FlowVerdict
    alert: Optional[Alert]
    signatures_scanned: int


@dataclass
class FlowValidatorState:
    """Signature set plus per-device packet-rate windows.

    Signatures are scanned in id order and the first match wins.  The rate
    window is a sliding count of packets per device over ``window_ms``
    simulated milliseconds; the packet that pushes the count past
    ``threshold`` is dropped.  An optional trained classifier can score
    per-device traffic features on top of the plain rate check.
    """

    node: str
    signatures: list[Signature] = field(default_factory=list)
    window_ms: int = DEFAULT_ANOMALY_WINDOW_MS
    threshold: int = DEFAULT_ANOMALY_THRESHOLD
    windows: dict[str, deque] = field(default_factory=dict)
    byte_counts: dict[str, int] = field(default_factory=dict)
    classifier: Optional[object] = None  # object with predict_one(features)
    feature_fn: Optional[object] = None  # callable(state, device) -> feature row

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("anomaly threshold must be positive")
        self.signatures = sorted(self.signatures, key=lambda s: s.sig_id)


def validate_flow(
    state: FlowValidatorState, packet: Packet, headers_only: bool = False
) -> FlowValidationResult:
    """Run signature scan then anomaly scoring for one packet.

    With ``headers_only`` the payload signatures and the rate window are
    skipped; that mode serves flow-setup decisions where only the header has
    reached the controller.
    """
    device = packet.src_mac
    header = packet_header_bytes(packet)
    scanned = 0
    for sig in state.signatures:
        scanned += 1
        if sig.scope == "header":
            haystack = header
        elif headers_only:
            continue
        else:
            haystack = packet.payload
        if sig.pattern and sig.pattern in haystack:
            alert = Alert(
                source="flow-validator",
                device_id=device,
                flow_id=packet.flow_id,
                reason=f"signature:{sig.sig_id}",
                severity="high",
                time_ms=packet.virtual_timestamp,
            )
            return FlowValidationResult(FlowDropSignature(sig.sig_id), alert, scanned)

    if headers_only:
        return FlowValidationResult(FlowForward(), None, scanned)

    window = state.windows.setdefault(device, deque())
    now = packet.virtual_timestamp
    cutoff = now - state.window_ms
    while window and window[0] <= cutoff:
        window.popleft()
    window.append(now)
    state.byte_counts[device] = state.byte_counts.get(device, 0) + len(packet.payload)
    if len(window) > state.threshold:
        score = len(window) / state.threshold
        alert = Alert(
            source="flow-validator",
            device_id=device,
            flow_id=packet.flow_id,
            reason="anomaly:rate",
            severity="high",
            time_ms=now,
        )
        return FlowValidationResult(FlowDropAnomaly(score), alert, scanned)

    if state.classifier is not None and state.feature_fn is not None:
        features = state.feature_fn(state, device)
        label = state.classifier.predict_one(features)
        if isinstance(label, tuple):
            label = label[0]
        if label == 1:
            alert = Alert(
                source="flow-validator",
                device_id=device,
                flow_id=packet.flow_id,
                reason="anomaly:classifier",
                severity="high",
                time_ms=now,
            )
            return FlowValidationResult(FlowDropAnomaly(float(label)), alert, scanned)

    return FlowValidationResult(FlowForward(), None, scanned)


# ---------------------------------------------------------------------------
# Attestation validation
# ---------------------------------------------------------------------------

class TrustVerdict(Enum):
    TRUSTED = "trusted"
    COMPROMISED = "compromised"
    STALE_NONCE = "stale-nonce"


def validate_attestation(expected_hash: bytes, report, nonce: bytes) -> TrustVerdict:
    """Compare a measured attestation report against the expected hash.

    Freshness is judged first: a report answering a different nonce is
    stale regardless of its hash.
    """
    if report.nonce != nonce:
        return TrustVerdict.STALE_NONCE
    if report.measured_hash != expected_hash:
        return TrustVerdict.COMPROMISED
    return TrustVerdict.TRUSTED


# ---------------------------------------------------------------------------
# Flow-rule audit
# ---------------------------------------------------------------------------

@dataclass
class AuditResult:
    node: str
    extra_rules: tuple[ReportedRule, ...]
    missing_rules: tuple[ReportedRule, ...]
    modified_rules: tuple[tuple[ReportedRule, ReportedRule], ...]  # (expected, observed)

    @property
    def clean(self) -> bool:
        return not (self.extra_rules or self.missing_rules or self.modified_rules)

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "clean": self.clean,
            "extra_rules": [r.to_dict() for r in self.extra_rules],
            "missing_rules": [r.to_dict() for r in self.missing_rules],
            "modified_rules": [
                {"expected": e.to_dict(), "observed": o.to_dict()}
                for e, o in self.modified_rules
            ],
        }


def audit_flow_rules(trusted: TrustedReport, observed: SwitchStateReport) -> AuditResult:
    """Diff the observed switch state against the trusted expected state.

    Rules are keyed by id: observed-only ids are extra, trusted-only ids are
    missing, shared ids with different content are modified.
    """
    if trusted.node_id != observed.node_id:
        raise ValueError(
            f"audit node mismatch: trusted={trusted.node_id!r} observed={observed.node_id!r}"
        )
    expected = {r.rule_id: r for r in trusted.rules}
    seen = {r.rule_id: r for r in observed.rules}
    extra = tuple(r for r in observed.rules if r.rule_id not in expected)
    missing = tuple(r for r in trusted.rules if r.rule_id not in seen)
    modified = tuple(
        (expected[rid], seen[rid])
        for rid in sorted(expected.keys() & seen.keys())
        if expected[rid] != seen[rid]
    )
    return AuditResult(
        node=trusted.node_id, extra_rules=extra, missing_rules=missing, modified_rules=modified
    )


def render_audit_diff(trusted: TrustedReport, observed: SwitchStateReport, width: int = 58) -> str:
    """Two-column side-by-side rendering: observed switch state | trusted state."""

    def lines(rules):
        out = []
        for r in rules:
            action = r.to_dict()["action"]
            out.append(f"{r.priority:>5}  {r.rule_id}  {action}")
        return out or ["(empty table)"]

    left = lines(observed.rules)
    right = lines(trusted.rules)
    rows = max(len(left), len(right))
    left += [""] * (rows - len(left))
    right += [""] * (rows - len(right))
    header = f"{'A) switch report':<{width}} | B) trusted report"
    rule = "-" * width + "-+-" + "-" * width
    body = []
    for l, r in zip(left, right):
        marker = " " if l == r else "!"
        body.append(f"{l:<{width}} {marker} {r}")
    return "\n".join([header, rule] + body)


# ---------------------------------------------------------------------------
# Key generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricKey:
    key_id: str
    key_bytes: bytes
    created_at: int
    endpoints: tuple[str, str]

    def __post_init__(self) -> None:
        if len(self.key_bytes) != KEY_BYTES:
            raise ValueError(f"key must be {KEY_BYTES} bytes")


class KeyGenerator:
    """Deterministic 128-bit key source: SHA-256 counter DRBG over a seed.

    Reproducible for a given seed, with unique key ids per instance.
    """

    def __init__(self, seed: int = 0) -> None:
        self._state = hashlib.sha256(b"key-generator|" + str(seed).encode()).digest()
        self._counter = 0

    def generate(self, endpoints: tuple[str, str], created_at: int = 0) -> SymmetricKey:
        a, b = endpoints
        if a == b:
            raise ValueError(f"key endpoints must be distinct, got {a!r} twice")
        self._counter += 1
        material = self._state + self._counter.to_bytes(8, "big")
        key = hashlib.sha256(material).digest()[:KEY_BYTES]
        return SymmetricKey(
            key_id=f"key-{self._counter:06d}",
            key_bytes=key,
            created_at=created_at,
            endpoints=(a, b),
        )


# ---------------------------------------------------------------------------
# Flow encryption
# ---------------------------------------------------------------------------

class AuthenticationError(Exception):
    """Raised when an envelope fails authentication; never returns garbage."""


@dataclass(frozen=True)
class CipherEnvelope:
    key_id: str
    nonce: bytes
    ciphertext: bytes  # includes the authentication tag

    def to_bytes(self) -> bytes:
        kid = self.key_id.encode()
        return ENVELOPE_MAGIC + len(kid).to_bytes(2, "big") + kid + self.nonce + self.ciphertext

    @classmethod
    def from_bytes(cls, data: bytes) -> "CipherEnvelope":
        if data[:4] != ENVELOPE_MAGIC:
            raise AuthenticationError("not a cipher envelope")
        kid_len = int.from_bytes(data[4:6], "big")
        kid_end = 6 + kid_len
        try:
            key_id = data[6:kid_end].decode()
        except UnicodeDecodeError as exc:
            raise AuthenticationError("malformed envelope key id") from exc
        nonce = data[kid_end:kid_end + NONCE_BYTES]
        ciphertext = data[kid_end + NONCE_BYTES:]
        if len(nonce) != NONCE_BYTES:
            raise AuthenticationError("truncated envelope")
        return cls(key_id=key_id, nonce=nonce, ciphertext=ciphertext)


def encrypt_flow_payload(key: SymmetricKey, payload: bytes, nonce: bytes) -> CipherEnvelope:
    """AES-128-GCM with an explicit per-packet 96-bit nonce."""
    if len(nonce) != NONCE_BYTES:
        raise ValueError(f"nonce must be {NONCE_BYTES} bytes")
    ciphertext = AESGCM(key.key_bytes).encrypt(nonce, payload, key.key_id.encode())
    return CipherEnvelope(key_id=key.key_id, nonce=nonce, ciphertext=ciphertext)


def decrypt_flow_payload(key: SymmetricKey, envelope: CipherEnvelope) -> bytes:
    if envelope.key_id != key.key_id:
        raise AuthenticationError(f"envelope keyed for {envelope.key_id!r}, not {key.key_id!r}")
    try:
        return AESGCM(key.key_bytes).decrypt(
            envelope.nonce, envelope.ciphertext, key.key_id.encode()
        )
    except InvalidTag as exc:
        raise AuthenticationError("envelope failed authentication") from exc


class FlowCipher:
    """Per-flow cipher handle: one key plus a per-packet nonce counter."""

    def __init__(self, key: SymmetricKey) -> None:
        self.key = key
        self._nonce_counter = 0

    def encrypt(self, payload: bytes) -> CipherEnvelope:
        self._nonce_counter += 1
        nonce = self._nonce_counter.to_bytes(NONCE_BYTES, "big")
        return encrypt_flow_payload(self.key, payload, nonce)

    def decrypt(self, envelope: CipherEnvelope) -> bytes:
        return decrypt_flow_payload(self.key, envelope)


# ---------------------------------------------------------------------------
# Device-specific checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviceFingerprint:
    device_id: str  # MAC
    ip: str


@dataclass(frozen=True)
class DeviceCheckResult:
    permitted: bool
    reason: Optional[str] = None


def device_specific_check(
    fingerprints: dict[str, DeviceFingerprint],
    whitelist: frozenset[str] | set[str],
    blacklist: frozenset[str] | set[str],
    packet: Packet,
) -> DeviceCheckResult:
    """Owner-supplied per-device policy: blacklist, whitelist, then fingerprint.

    Lists carry destination IPs.  A fingerprint binds the device MAC to its
    registered source IP; a mismatch is treated as spoofing.
    """
    if packet.dst_ip in blacklist:
        return DeviceCheckResult(False, "blacklisted-destination")
    if packet.dst_ip in whitelist:
        return DeviceCheckResult(True, "whitelisted-destination")
    fingerprint = fingerprints.get(packet.src_mac)
    if fingerprint is not None and fingerprint.ip != packet.src_ip:
        return DeviceCheckResult(False, "spoof")
    return DeviceCheckResult(True, None)
