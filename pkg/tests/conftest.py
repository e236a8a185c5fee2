from __future__ import annotations

from pathlib import Path

import pytest

import bridgeaudit

from bridgeaudit.config import config_from_document, offline_config_document
from bridgeaudit.frontend.loader import load_codebase

GOLDEN = Path(__file__).parent / "golden"


def fixture_path() -> Path:
    return Path(bridgeaudit.__file__).parent / "fixtures" / "bridge"


@pytest.fixture(scope="session")
def bridge_dir() -> Path:
    return fixture_path()


@pytest.fixture(scope="session")
def bridge_ast():
    return load_codebase(fixture_path())


@pytest.fixture
def offline_cfg():
    return config_from_document(offline_config_document())


@pytest.fixture
def verdict(capsys):
    """Print one acceptance line straight to the terminal."""

    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nAC{number} {'PASS' if ok else 'FAIL'}: {detail}")

    return emit
