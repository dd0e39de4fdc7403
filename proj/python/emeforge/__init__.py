"""Python access to the emeforge protocol simulator and privacy auditor.

Reports come back as parsed JSON documents with the same shape as the
``emeforge audit --format json`` output.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Any, Optional

from ._emeforge import (
    EmeForgeError,
    IngestStore as _IngestStore,
    audit_policy,
    augmented_ua,
    client_info,
    decode_policy,
    encode_policy,
    matrix_preset_names,
    parse_nesn,
    preset,
    preset_names,
    render_user_agent,
    simulate,
    ua_conflict,
)
from ._emeforge import audit_profile_json as _audit_profile_json
from ._emeforge import audit_trace_json as _audit_trace_json

__all__ = [
    "EmeForgeError",
    "IngestStore",
    "audit_policy",
    "audit_profile",
    "audit_trace",
    "augmented_ua",
    "client_info",
    "decode_policy",
    "encode_policy",
    "matrix_preset_names",
    "parse_nesn",
    "preset",
    "preset_names",
    "render_user_agent",
    "simulate",
    "ua_conflict",
]


def audit_trace(jsonl: str, lenient: bool = False, claimed_ua: Optional[str] = None) -> dict[str, Any]:
    return json.loads(_audit_trace_json(jsonl, lenient, claimed_ua))


def audit_profile(profile: str, seed: int = 1) -> dict[str, Any]:
    return json.loads(_audit_profile_json(profile, seed))


class IngestStore:
    """In-memory store of probe captures, audited per source."""

    def __init__(self) -> None:
        self._store = _IngestStore()

    def ingest(self, record: dict[str, Any], received_at: Optional[str] = None) -> dict[str, Any]:
        if received_at is None:
            received_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return json.loads(self._store.ingest_json(json.dumps(record), received_at))

    def report(self, source: str) -> Optional[dict[str, Any]]:
        text = self._store.report_json(source)
        return None if text is None else json.loads(text)

    def sources(self) -> list[str]:
        return self._store.sources()
