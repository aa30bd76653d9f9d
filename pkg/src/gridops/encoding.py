"""Canonical serialization and content digests for determinism checks."""

from __future__ import annotations

import hashlib
import json


def canonical_json(doc) -> str:
    """Stable text form: sorted keys, tight separators, repr-exact floats."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(doc) -> str:
    """Hex sha-256 of the canonical serialization."""
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
