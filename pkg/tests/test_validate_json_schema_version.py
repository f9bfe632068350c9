from __future__ import annotations

import json
from pathlib import Path

import pytest

from sofrgit.tools import validate_json as vj

MINIMAL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["meta", "run", "checks", "summary"],
    "properties": {
        "meta": {
            "type": "object",
            "required": ["schema_version"],
            "properties": {"schema_version": {"type": "string"}},
        },
        "run": {"type": "object"},
        "checks": {"type": "array"},
        "summary": {"type": "object", "required": ["failed"]},
    },
    "additionalProperties": True,
}


@pytest.fixture
def minimal_schema(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(vj, "_load_schema_text", lambda: json.dumps(MINIMAL_SCHEMA))


def _report(version: str, failed: int = 0) -> dict:
    return {"meta": {"schema_version": version}, "run": {}, "checks": [], "summary": {"failed": failed}}


def _write_json(path: Path, obj: dict) -> Path:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False), encoding="utf-8")
    return path


def test_validate_json_accepts_matching_schema_version(tmp_path: Path, minimal_schema: None) -> None:
    p = _write_json(tmp_path / "report.json", _report(vj.EXPECTED_SCHEMA_VERSION, failed=2))
    result = vj.validate_json(p)
    assert result.ok is True
    assert result.schema_version == vj.EXPECTED_SCHEMA_VERSION
    assert result.failed_checks == 2


def test_validate_json_rejects_mismatched_schema_version(tmp_path: Path, minimal_schema: None) -> None:
    p = _write_json(tmp_path / "report.json", _report("v999"))
    with pytest.raises(vj.SchemaVersionMismatch):
        vj.validate_json(p)


def test_validate_json_rejects_missing_meta(tmp_path: Path, minimal_schema: None) -> None:
    p = _write_json(tmp_path / "report.json", {"run": {}, "checks": [], "summary": {"failed": 0}})
    with pytest.raises(vj.SchemaVersionMismatch):
        vj.validate_json(p)


def test_non_finite_constants_are_rejected(tmp_path: Path) -> None:
    p = tmp_path / "report.json"
    p.write_text('{"meta": {"schema_version": "v1"}, "value": NaN}', encoding="utf-8")
    with pytest.raises(vj.StrictJsonError):
        vj.validate_json(p)


def test_top_level_must_be_an_object() -> None:
    with pytest.raises(vj.StrictJsonError):
        vj.parse_strict_json("[1, 2]")
    with pytest.raises(vj.StrictJsonError):
        vj.parse_strict_json("{not json")


def test_missing_report_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        vj.validate_json(tmp_path / "absent.json")


def test_main_exit_codes(tmp_path: Path, minimal_schema: None, capsys: pytest.CaptureFixture[str]) -> None:
    good = _write_json(tmp_path / "good.json", _report(vj.EXPECTED_SCHEMA_VERSION))
    bad = _write_json(tmp_path / "bad.json", _report("v0"))
    assert vj.main([str(good)]) == 0
    assert capsys.readouterr().out.startswith("OK: ")
    assert vj.main([str(bad)]) == 1
    assert "ERROR:" in capsys.readouterr().out
