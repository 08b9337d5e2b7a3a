from __future__ import annotations

import logging
from pathlib import Path

import pytest

from nasverify.model_file import ModelBundle, parse_model

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture(autouse=True)
def _restore_logging():
    """The CLI takes over the package logger; hand it back to pytest after each test."""
    yield
    logger = logging.getLogger("nasverify")
    logger.handlers.clear()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@pytest.fixture
def two_stage() -> ModelBundle:
    return parse_model((MODELS / "two_stage.yaml").read_text(encoding="utf-8"))


@pytest.fixture
def steam_boiler() -> ModelBundle:
    return parse_model((MODELS / "steam_boiler.yaml").read_text(encoding="utf-8"))
