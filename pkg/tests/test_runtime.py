import json
from pathlib import Path

import pytest

from mixed_mfa import runtime as rt


def test_plain_lines_respect_the_level(capsys: pytest.CaptureFixture[str]) -> None:
    rt.log("[root ] hidden", "DEBUG")
    rt.log("[WARN ] shown", "warning")
    assert capsys.readouterr().out == "[WARN ] shown\n"


def test_json_lines_carry_logger_and_tag(
    monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    monkeypatch.setattr(rt, "LOG_JSON", True)
    monkeypatch.setattr(rt, "LOG_LEVEL", 10)
    rt.log("[sand ] theta(E)=1", "debug")
    rt.log("no tag here")
    first, second = (json.loads(line) for line in capsys.readouterr().out.splitlines())
    assert first["logger"] == "mixed_mfa"
    assert first["level"] == "DEBUG"
    assert first["tag"] == "sand"
    assert "tag" not in second and second["message"] == "no tag here"


def test_log_file_is_rotated(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    path = tmp_path / "run.log"
    path.write_text("x" * 64, encoding="utf-8")
    monkeypatch.setattr(rt, "LOG_FILE", str(path))
    monkeypatch.setattr(rt, "LOG_FILE_MAX_BYTES", 32)
    rt.log("[DONE ] finished", "ERROR")
    assert path.read_text(encoding="utf-8") == "[DONE ] finished\n"
    assert (tmp_path / "run.log.1").read_text(encoding="utf-8") == "x" * 64
