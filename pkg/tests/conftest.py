import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT / "src") not in sys.path:
    sys.path.insert(0, str(ROOT / "src"))

from mixed_mfa import runtime as rt  # noqa: E402
from mixed_mfa.measure import CascadeSpec, SelfSimilarMeasure, build_measure  # noqa: E402


def binomial(p0: float = 0.25, name: str = "binomial") -> SelfSimilarMeasure:
    return build_measure(CascadeSpec((0.5, 0.5), (p0, 1.0 - p0)), name)


def lebesgue(name: str = "lebesgue") -> SelfSimilarMeasure:
    return binomial(0.5, name)


def cantor(weights: tuple[float, float] = (0.5, 0.5), name: str = "cantor") -> SelfSimilarMeasure:
    return build_measure(CascadeSpec((1 / 3, 1 / 3), weights, (0.0, 2 / 3)), name)


@pytest.fixture(autouse=True)
def _quiet_runtime(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep runtime globals isolated between tests."""
    monkeypatch.setattr(rt, "THREADS", 1)
    monkeypatch.setattr(rt, "LOG_LEVEL", 30)
    monkeypatch.setattr(rt, "LOG_JSON", False)
    monkeypatch.setattr(rt, "LOG_FILE", None)
    monkeypatch.setattr(rt, "DRY_RUN", False)
    monkeypatch.setattr(rt, "PROGRESS", False)
    monkeypatch.setattr(rt, "OUTPUT_DIR", None)
    monkeypatch.setattr(rt, "OUTPUT_FORMAT", "csv")
