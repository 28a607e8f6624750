from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from sidecar.app import create_app
from sidecar.models import ModelService

CHECKPOINTS = Path(__file__).parent / "checkpoints"
SHARED = Path(__file__).parent.parent.parent / "shared"


@pytest.fixture(scope="session")
def service() -> ModelService:
    return ModelService(str(CHECKPOINTS / "tiny-qa"), str(CHECKPOINTS / "tiny-gen"))


@pytest.fixture(scope="session")
def client(service) -> TestClient:
    return TestClient(create_app(service))


@pytest.fixture(scope="session")
def story_text() -> str:
    return (SHARED / "vault_story.txt").read_text("utf-8")
