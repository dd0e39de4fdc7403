import base64
import json

import pytest

import emeforge


def test_policy_round_trip_and_codes():
    wire = emeforge.encode_policy("renewal_delay_s=10&always_include_client_id=true")
    assert bytes([0x48, 0x0A]) in wire
    assert bytes([0x60, 0x01]) in wire
    assert emeforge.decode_policy(wire) == "renewal_delay_s=10&always_include_client_id=true"
    assert emeforge.encode_policy("watermarking_control=1").startswith(bytes([0x80, 0x01]))


def test_presets():
    names = emeforge.matrix_preset_names()
    assert len(names) == 15
    canonical = set(emeforge.preset_names())
    assert all(emeforge.preset(n)["name"] in canonical for n in names)
    assert emeforge.preset("chrome_desktop")["platform"] == "DESKTOP_VMP"
    assert emeforge.preset("tor_android")["eme_supported"] is False
    with pytest.raises(emeforge.EmeForgeError) as err:
        emeforge.preset("lynx")
    assert err.value.code == "UnknownProfile"


def test_simulate_and_audit_trace():
    trace = emeforge.simulate("firefox_android", seed=3)
    records = [json.loads(line) for line in trace.splitlines()]
    assert any(r["kind"] == "LICENSE_REQUEST" for r in records)
    report = emeforge.audit_trace(trace)
    assert report["verdicts"]["RQ1"] == "NONCOMPLIANT"
    assert report["fingerprint"]["class"] == "UNIQUE_DEVICE"
    assert "CDM/17.0.0" in report["augmented_ua"]

    assert emeforge.simulate("firefox_android", seed=3) == trace
    assert emeforge.simulate("firefox_android", seed=4) != trace

    encrypted = emeforge.audit_trace(emeforge.simulate("chrome_android"))
    assert encrypted["verdicts"]["RQ1"] == "COMPLIANT"
    assert encrypted["fingerprint"] is None


def test_simulate_errors():
    with pytest.raises(emeforge.EmeForgeError) as err:
        emeforge.simulate("tor_desktop")
    assert err.value.code == "EmeUnsupported"
    with pytest.raises(emeforge.EmeForgeError):
        emeforge.audit_trace("{not json}\n")


def test_audit_profile_matrix_rows():
    assert emeforge.audit_profile("samsung_android")["verdicts"] == {
        "RQ1": "COMPLIANT",
        "RQ2": "COMPLIANT",
        "RQ3": "NONCOMPLIANT",
    }
    assert emeforge.audit_profile("edge_desktop")["verdicts"]["RQ2"] == "NONCOMPLIANT"


def test_user_agent_helpers():
    info = emeforge.client_info("chrome_android")
    assert info["architecture"] == "arm64-v8a"
    assert info["platform_name"] is None
    assert emeforge.ua_conflict(emeforge.render_user_agent("chrome_android"), "chrome_android") is None
    windows = "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 Chrome/120.0 Safari/537.36"
    assert emeforge.ua_conflict(windows, "chrome_android")
    assert emeforge.augmented_ua("firefox_linux").startswith("(Linux; x64")


def test_nesn():
    mobile = emeforge.parse_nesn("NFANDROID2-16-GOOGLE-PIXEL7-" + "A1" * 32)
    assert mobile["severity"] == "VIOLATION"
    desktop = emeforge.parse_nesn("ChromeCDM-16-Google-Chrome-" + "Z" * 30)
    assert desktop["category"] == "ChromeCDM"
    assert desktop["severity"] == "WARN"
    assert emeforge.parse_nesn("A-1-B-C-short")["severity"] is None
    with pytest.raises(emeforge.EmeForgeError):
        emeforge.parse_nesn("nope")


def test_ingest_store():
    trace = [json.loads(l) for l in emeforge.simulate("ghostery_android").splitlines()]
    lr = next(r for r in trace if r["kind"] == "LICENSE_REQUEST")
    store = emeforge.IngestStore()
    record = {"source": "probe-1", "kind": "LICENSE_REQUEST", "body_b64": lr["body_b64"]}
    first = store.ingest(record, "2026-01-01T00:00:00Z")
    assert first["violations"] == ["RQ1_CLEAR_CLIENT_ID_IN_LICENSE_REQUEST"]
    again = store.ingest(record)
    assert again["duplicate"] is True
    assert again["findings"] == first["findings"]
    assert store.report("probe-1")["verdicts"]["RQ1"] == "NONCOMPLIANT"
    assert store.report("missing") is None
    assert store.sources() == ["probe-1"]
    with pytest.raises(emeforge.EmeForgeError):
        store.ingest({"source": "x", "kind": "LICENSE_REQUEST", "body_b64": "%%%"})
    assert base64.b64decode(lr["body_b64"])
