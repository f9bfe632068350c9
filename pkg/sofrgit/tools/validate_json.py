"""
Checks a report written by ``sofrgit validate``: strict JSON (no NaN or Infinity),
the schema version it was written against, then the bundled JSON Schema. Every
schema violation is collected; the most relevant one is raised.
"""

from __future__ import annotations

import argparse
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
from jsonschema.exceptions import best_match

from sofrgit.schema_constants import SCHEMA_RESOURCE_NAME, SCHEMA_RESOURCE_PACKAGE, SCHEMA_VERSION

EXPECTED_SCHEMA_VERSION = SCHEMA_VERSION

logger = logging.getLogger(__name__)


class StrictJsonError(ValueError):
    """Report text is not strict JSON, or its top level is not an object."""


class SchemaVersionMismatch(ValueError):
    """meta.schema_version is missing or differs from the version this build writes."""


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    schema_version: str
    failed_checks: int


def _forbid_constant(name: str) -> Any:
    raise StrictJsonError(f"non-finite constant {name} in report")


def parse_strict_json(text: str) -> dict[str, Any]:
    try:
        data = json.loads(text, parse_constant=_forbid_constant)
    except json.JSONDecodeError as e:
        raise StrictJsonError(f"not JSON: {e.msg} at line {e.lineno}, column {e.colno}") from e
    if not isinstance(data, dict):
        raise StrictJsonError(f"report must be a JSON object, got {type(data).__name__}")
    return data


def _load_schema_text() -> str:
    return resources.files(SCHEMA_RESOURCE_PACKAGE).joinpath(SCHEMA_RESOURCE_NAME).read_text(encoding="utf-8")


def load_schema() -> dict[str, Any]:
    return parse_strict_json(_load_schema_text())


def report_schema_version(data: dict[str, Any]) -> str:
    meta = data.get("meta")
    version = meta.get("schema_version") if isinstance(meta, dict) else None
    if not isinstance(version, str) or not version.strip():
        raise SchemaVersionMismatch("meta.schema_version is missing or empty")
    return version.strip()


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def schema_errors(data: dict[str, Any]) -> list[jsonschema.ValidationError]:
    """Every violation of the bundled schema, ordered by location in the report."""
    validator = jsonschema.Draft202012Validator(load_schema())
    return sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])


def validate_payload(data: dict[str, Any], *, expected_schema_version: str = EXPECTED_SCHEMA_VERSION) -> ValidationResult:
    actual = report_schema_version(data)
    if actual != expected_schema_version:
        raise SchemaVersionMismatch(
            f"report written against schema {actual!r}, this build reads {expected_schema_version!r}"
        )
    errors = schema_errors(data)
    if errors:
        for err in errors:
            logger.debug("schema violation at %s: %s", _where(err), err.message)
        raise best_match(errors)
    return ValidationResult(ok=True, schema_version=actual, failed_checks=int(data["summary"]["failed"]))


def validate_json(path: str | Path, *, expected_schema_version: str = EXPECTED_SCHEMA_VERSION) -> ValidationResult:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"report not found: {p}")
    return validate_payload(parse_strict_json(p.read_text(encoding="utf-8")),
                            expected_schema_version=expected_schema_version)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description="Check a sofrgit validation report against the bundled schema.")
    ap.add_argument("path", help="Validation report JSON")
    args = ap.parse_args(argv)

    try:
        result = validate_json(args.path)
    except jsonschema.ValidationError as e:
        print(f"ERROR: {args.path}: {_where(e)}: {e.message}")
        return 1
    except (OSError, ValueError) as e:
        print(f"ERROR: {e}")
        return 1

    print(f"OK: {args.path} (schema {result.schema_version}, {result.failed_checks} failed checks)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
