"""Security function unit tests: access control, flow validation, attestation,
rule audit, key generation, flow encryption, device-specific checks."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slice_sentinel.fabric import (
    Drop,
    FlowKey,
    Packet,
    ReportedRule,
    SwitchStateReport,
    canonical_rule_order,
)
from slice_sentinel.policy import TrustedReport
from slice_sentinel.security_functions import (
    AccessVerdict,
    AuthenticationError,
    CipherEnvelope,
    DeviceCheckResult,
    DeviceFingerprint,
    FlowCipher,
    FlowDropAnomaly,
    FlowDropSignature,
    FlowForward,
    FlowValidatorState,
    KeyGenerator,
    Signature,
    SliceAccessState,
    TrustVerdict,
    audit_flow_rules,
    check_slice_access,
    device_specific_check,
    encrypt_flow_payload,
    parse_signatures,
    render_audit_diff,
    validate_attestation,
    validate_flow,
)

SHELLSHOCK = b"() { :;};"


def packet(mac="00:09:00:AA", payload=b"", ts=0, flow="f1", src_ip="10.0.0.1"):
    return Packet(
        src_ip=src_ip, dst_ip="10.0.0.8", src_mac=mac, dst_mac="00:09:00:BB",
        payload=payload, flow_id=flow, virtual_timestamp=ts,
    )


class TestSliceAccess:
    def test_registered_device_outside_its_slices_denied(self):
        state = SliceAccessState(node="OVS1", allowed={"printer": {(100, "Service3")}})
        verdict = check_slice_access(state, packet(mac="printer"), requested=(200, "Service1"))
        assert verdict == AccessVerdict.DENY_UNAUTHORIZED

    def test_blacklist_beats_everything(self):
        state = SliceAccessState(
            node="OVS1",
            allowed={"sensor": {(200, "Service1")}},
            blacklist={"sensor"},
        )
        verdict = check_slice_access(state, packet(mac="sensor"), requested=(200, "Service1"))
        assert verdict == AccessVerdict.DENY_BLACKLISTED

    def test_unknown_device_routes_generic(self):
        state = SliceAccessState(node="OVS1")
        verdict = check_slice_access(state, packet(mac="stranger"), requested=(200, "Service1"))
        assert verdict == AccessVerdict.ROUTE_GENERIC

    def test_allowed_pair_permits(self):
        state = SliceAccessState(node="OVS1", allowed={"ue1": {(200, "Service1")}})
        assert check_slice_access(state, packet(mac="ue1"), (200, "Service1")) == AccessVerdict.PERMIT


class TestFlowValidation:
    def test_shellshock_payload_dropped_by_signature(self):
        state = FlowValidatorState(
            node="OVS1",
            signatures=[Signature("sig-shellshock", SHELLSHOCK, "payload")],
        )
        exploit = b"GET /cgi-bin/status HTTP/1.1\r\nUser-Agent: () { :;}; /bin/id\r\n"
        result = validate_flow(state, packet(payload=exploit))
        assert result.verdict == FlowDropSignature("sig-shellshock")
        assert result.alert is not None
        assert result.alert.reason == "signature:sig-shellshock"

    def test_benign_packet_forwards_with_empty_signature_set(self):
        state = FlowValidatorState(node="OVS1")
        result = validate_flow(state, packet(payload=b"hello"))
        assert result.verdict == FlowForward()
        assert result.alert is None

    def test_first_matching_signature_by_id_order_wins(self):
        state = FlowValidatorState(
            node="OVS1",
            signatures=[
                Signature("sig-b", b"attack", "payload"),
                Signature("sig-a", b"attack", "payload"),
            ],
        )
        result = validate_flow(state, packet(payload=b"attack here"))
        assert result.verdict == FlowDropSignature("sig-a")
        assert result.signatures_scanned == 1

    def test_rate_threshold_crossing_matches_counter_oracle(self):
        # Oracle: simulate the window as a plain list over the schedule; the
        # first packet whose in-window count exceeds the threshold must drop.
        threshold, window_ms = 100, 1000
        schedule = [i for i in range(500)]  # 1 packet per ms: 500/s vs 100/s cap
        counts = []
        for i, t in enumerate(schedule):
            in_window = [u for u in schedule[: i + 1] if u > t - window_ms]
            counts.append(len(in_window))
        expected_first_drop = next(i for i, c in enumerate(counts) if c > threshold)

        state = FlowValidatorState(node="OVS1", threshold=threshold, window_ms=window_ms)
        verdicts = [validate_flow(state, packet(ts=t)).verdict for t in schedule]
        first_drop = next(i for i, v in enumerate(verdicts) if isinstance(v, FlowDropAnomaly))
        assert first_drop == expected_first_drop == threshold

    def test_below_threshold_never_drops(self):
        state = FlowValidatorState(node="OVS1", threshold=100, window_ms=1000)
        for t in range(0, 2000, 20):  # 50 packets per second
            result = validate_flow(state, packet(ts=t))
            assert result.verdict == FlowForward()

    def test_trained_classifier_hook_can_flag_traffic(self):
        # A classifier scoring per-device window features plugs in behind the
        # plain rate check.
        class FlagHighRate:
            def predict_one(self, features):
                return 1 if features[0] > 50 else 0

        def window_features(state, device):
            return [len(state.windows.get(device, ()))]

        state = FlowValidatorState(
            node="OVS1", threshold=10**9,
            classifier=FlagHighRate(), feature_fn=window_features,
        )
        verdicts = [validate_flow(state, packet(ts=t)).verdict for t in range(60)]
        assert all(isinstance(v, FlowForward) for v in verdicts[:50])
        assert any(isinstance(v, FlowDropAnomaly) for v in verdicts[50:])

    def test_parse_signatures_rejects_duplicates_and_bad_scope(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_signatures([{"id": "s", "pattern_hex": "00"}, {"id": "s", "pattern_hex": "01"}])
        with pytest.raises(ValueError, match="scope"):
            parse_signatures([{"id": "s", "pattern_hex": "00", "scope": "weird"}])


class TestAttestationValidation:
    class FakeReport:
        def __init__(self, measured_hash, nonce):
            self.measured_hash = measured_hash
            self.nonce = nonce

    def test_matching_hash_and_nonce_is_trusted(self):
        expected = b"h" * 32
        report = self.FakeReport(expected, b"n" * 16)
        assert validate_attestation(expected, report, b"n" * 16) == TrustVerdict.TRUSTED

    def test_hash_mismatch_is_compromised(self):
        report = self.FakeReport(b"x" * 32, b"n" * 16)
        assert validate_attestation(b"h" * 32, report, b"n" * 16) == TrustVerdict.COMPROMISED

    def test_replayed_nonce_is_stale_even_with_correct_hash(self):
        expected = b"h" * 32
        report = self.FakeReport(expected, b"old-nonce-123456")
        assert validate_attestation(expected, report, b"new-nonce-654321") == TrustVerdict.STALE_NONCE


def reported(rule_id, priority=10, src_ip=None, action=None):
    return ReportedRule(
        rule_id=rule_id,
        match=FlowKey(src_ip=src_ip),
        action=action or Drop(),
        priority=priority,
    )


def make_reports(trusted_rules, observed_rules, node="OVS1"):
    return (
        TrustedReport(node_id=node, rules=canonical_rule_order(trusted_rules)),
        SwitchStateReport(node_id=node, rules=canonical_rule_order(observed_rules), report_time=0),
    )


class TestRuleAudit:
    def test_identical_reports_are_clean(self):
        rules = [reported("r1"), reported("r2", priority=5)]
        trusted, observed = make_reports(rules, rules)
        result = audit_flow_rules(trusted, observed)
        assert result.clean

    def test_injected_rule_is_the_exact_extra_set(self):
        base = [reported("r1"), reported("r2", priority=5)]
        injected = reported("atk-3346", priority=50, src_ip="10.0.0.66")
        trusted, observed = make_reports(base, base + [injected])
        result = audit_flow_rules(trusted, observed)
        assert result.extra_rules == (injected,)
        assert result.missing_rules == ()
        assert result.modified_rules == ()

    def test_silently_retained_rule_shows_as_extra(self):
        # Controller deleted r1 (folded out of the trusted report) but the
        # switch kept it.
        kept = reported("r1")
        trusted, observed = make_reports([reported("r2", priority=5)],
                                         [kept, reported("r2", priority=5)])
        result = audit_flow_rules(trusted, observed)
        assert result.extra_rules == (kept,)

    def test_node_mismatch_rejected(self):
        trusted, _ = make_reports([], [], node="OVS1")
        _, observed = make_reports([], [], node="OVS2")
        with pytest.raises(ValueError, match="mismatch"):
            audit_flow_rules(trusted, observed)

    def test_modified_rule_detected(self):
        trusted, observed = make_reports(
            [reported("r1", priority=10)], [reported("r1", priority=99)]
        )
        result = audit_flow_rules(trusted, observed)
        assert len(result.modified_rules) == 1
        expected, seen = result.modified_rules[0]
        assert expected.priority == 10 and seen.priority == 99

    def test_diff_rendering_mentions_both_windows(self):
        trusted, observed = make_reports([reported("r1")], [reported("r1"), reported("x")])
        text = render_audit_diff(trusted, observed)
        assert "A) switch report" in text and "B) trusted report" in text
        assert "x" in text


rule_ids = st.lists(
    st.text(alphabet="abcdef0123456789", min_size=3, max_size=8),
    min_size=0, max_size=40, unique=True,
)


@settings(max_examples=100, deadline=None)
@given(rule_ids, st.integers(0, 9))
def test_audit_exactness_property(ids, split):
    # For disjoint T and X: audit(T, T|X).extra == X exactly.
    rules = [reported(rid, priority=(hash(rid) % 5)) for rid in ids]
    trusted_rules, injected = rules[split:], rules[:split]
    trusted, observed = make_reports(trusted_rules, trusted_rules + injected)
    result = audit_flow_rules(trusted, observed)
    assert set(result.extra_rules) == set(injected)
    assert result.missing_rules == ()
    assert result.modified_rules == ()


@settings(max_examples=100, deadline=None)
@given(rule_ids, rule_ids)
def test_audit_symmetry_property(ids_a, ids_b):
    a = [reported(rid) for rid in ids_a]
    b = [reported(rid) for rid in ids_b]
    ra, oa = make_reports(a, b)
    rb, ob = make_reports(b, a)
    forward = audit_flow_rules(ra, oa)
    backward = audit_flow_rules(rb, ob)
    assert set(forward.extra_rules) == set(backward.missing_rules)
    assert set(forward.missing_rules) == set(backward.extra_rules)


class TestKeyGeneration:
    def test_same_seed_reproduces_same_keys(self):
        a = KeyGenerator(seed=7).generate(("OVS1", "CORE1"))
        b = KeyGenerator(seed=7).generate(("OVS1", "CORE1"))
        assert a.key_bytes == b.key_bytes
        assert a.key_id == b.key_id
        assert len(a.key_bytes) == 16

    def test_consecutive_keys_differ(self):
        gen = KeyGenerator(seed=7)
        k1 = gen.generate(("OVS1", "CORE1"))
        k2 = gen.generate(("OVS1", "CORE1"))
        assert k1.key_id != k2.key_id
        assert k1.key_bytes != k2.key_bytes

    def test_no_collisions_over_ten_thousand_keys(self):
        gen = KeyGenerator(seed=3)
        seen_bytes = set()
        seen_ids = set()
        for _ in range(10_000):
            key = gen.generate(("A", "B"))
            seen_bytes.add(key.key_bytes)
            seen_ids.add(key.key_id)
        assert len(seen_bytes) == 10_000
        assert len(seen_ids) == 10_000

    def test_identical_endpoints_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            KeyGenerator().generate(("OVS1", "OVS1"))


class TestFlowEncryption:
    def test_round_trip_identity(self):
        key = KeyGenerator(seed=1).generate(("A", "B"))
        cipher = FlowCipher(key)
        for payload in (b"", b"x", b"hello world", bytes(range(256)) * 4):
            envelope = cipher.encrypt(payload)
            assert cipher.decrypt(envelope) == payload

    def test_ciphertext_differs_from_plaintext(self):
        key = KeyGenerator(seed=1).generate(("A", "B"))
        envelope = FlowCipher(key).encrypt(b"confidential-reading")
        assert envelope.ciphertext != b"confidential-reading"
        assert b"confidential-reading" not in envelope.to_bytes()

    def test_any_flipped_ciphertext_byte_fails_authentication(self):
        key = KeyGenerator(seed=1).generate(("A", "B"))
        envelope = FlowCipher(key).encrypt(b"payload under test")
        for i in range(len(envelope.ciphertext)):
            corrupted = bytearray(envelope.ciphertext)
            corrupted[i] ^= 0x01
            bad = CipherEnvelope(envelope.key_id, envelope.nonce, bytes(corrupted))
            with pytest.raises(AuthenticationError):
                FlowCipher(key).decrypt(bad)

    def test_wrong_key_fails_authentication(self):
        gen = KeyGenerator(seed=1)
        key_a = gen.generate(("A", "B"))
        key_b = gen.generate(("A", "B"))
        envelope = FlowCipher(key_a).encrypt(b"secret")
        with pytest.raises(AuthenticationError):
            FlowCipher(key_b).decrypt(envelope)

    def test_envelope_byte_round_trip(self):
        key = KeyGenerator(seed=2).generate(("A", "B"))
        envelope = FlowCipher(key).encrypt(b"wire format")
        parsed = CipherEnvelope.from_bytes(envelope.to_bytes())
        assert parsed == envelope

    def test_unique_nonce_per_packet(self):
        key = KeyGenerator(seed=2).generate(("A", "B"))
        cipher = FlowCipher(key)
        nonces = {cipher.encrypt(b"p").nonce for _ in range(100)}
        assert len(nonces) == 100


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=0, max_size=2048))
def test_encrypt_decrypt_identity_property(payload):
    key = KeyGenerator(seed=9).generate(("A", "B"))
    envelope = encrypt_flow_payload(key, payload, nonce=bytes(12))
    from slice_sentinel.security_functions import decrypt_flow_payload

    assert decrypt_flow_payload(key, envelope) == payload


class TestDeviceSpecificCheck:
    FP = {"00:09:00:AA": DeviceFingerprint(device_id="00:09:00:AA", ip="10.0.0.1")}

    def test_whitelisted_destination_permitted(self):
        result = device_specific_check(self.FP, {"10.0.0.8"}, set(), packet())
        assert result == DeviceCheckResult(True, "whitelisted-destination")

    def test_blacklisted_destination_denied_even_if_whitelisted(self):
        result = device_specific_check(self.FP, {"10.0.0.8"}, {"10.0.0.8"}, packet())
        assert result.permitted is False

    def test_fingerprint_mismatch_denied_as_spoof(self):
        # Oracle: compare the packet header tuple against the stored binding.
        spoofed = packet(src_ip="10.0.0.99")
        stored = self.FP[spoofed.src_mac]
        assert (spoofed.src_mac, spoofed.src_ip) != (stored.device_id, stored.ip)
        result = device_specific_check(self.FP, set(), set(), spoofed)
        assert result == DeviceCheckResult(False, "spoof")

    def test_clean_packet_permitted(self):
        result = device_specific_check(self.FP, set(), set(), packet())
        assert result.permitted is True
