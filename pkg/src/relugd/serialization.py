"""Versioned JSON documents.

Every document carries ``"schema": "relugd.<kind>/<major>.<minor>"``. Readers
accept any minor revision of the major version they know and reject the rest.
"""
import json
import math

from relugd.errors import SchemaError

SCHEMA_VERSIONS = {
    "network": (1, 0),
    "dataset": (1, 0),
    "trajectory": (1, 0),
    "gram": (1, 0),
    "certificate": (1, 0),
    "probes": (1, 0),
    "verification": (1, 0),
    "config": (1, 0),
}


def schema_tag(kind):
    major, minor = SCHEMA_VERSIONS[kind]
    return f"relugd.{kind}/{major}.{minor}"


def check_schema(doc, kind):
    """Raise :class:`SchemaError` unless ``doc`` declares a readable ``kind`` schema."""
    tag = doc.get("schema") if isinstance(doc, dict) else None
    if not isinstance(tag, str) or "/" not in tag:
        raise SchemaError(f"missing or malformed schema field: {tag!r}")
    name, _, version = tag.partition("/")
    if name != f"relugd.{kind}":
        raise SchemaError(f"expected a relugd.{kind} document, got {name!r}")
    try:
        major = int(version.split(".")[0])
    except ValueError:
        raise SchemaError(f"malformed schema version {version!r}") from None
    if major != SCHEMA_VERSIONS[kind][0]:
        raise SchemaError(f"unsupported {kind} schema major version {major}")


def _finite_floats(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value {obj!r} cannot be serialized")
    if isinstance(obj, dict):
        for v in obj.values():
            _finite_floats(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _finite_floats(v)


def dumps(doc, allow_nonfinite=False):
    """Serialize with shortest round-trip float reprs and a trailing newline.

    Floats are written with ``repr``, which round-trips every finite double
    exactly. Non-finite values are rejected unless ``allow_nonfinite``; callers
    that allow them must flag them separately.
    """
    if not allow_nonfinite:
        _finite_floats(doc)
    return json.dumps(doc, indent=2, allow_nan=allow_nonfinite) + "\n"


def dump(doc, path, allow_nonfinite=False):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(doc, allow_nonfinite=allow_nonfinite))


def load(path, kind):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    check_schema(doc, kind)
    return doc
