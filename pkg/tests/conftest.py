"""Shared fixtures: the reactor benchmark model and its known-good
parameter values."""

import json
import pathlib
from fractions import Fraction

import pytest

from cisynth.sets import parse_model, parse_templates

ROOT = pathlib.Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"

# Closed-form refinement parameters for the reactor benchmark; the cegis
# backend recovers these exactly (see tests/test_acceptance.py).
EQ7_PARAMS = {
    "a": Fraction(6575, 12),
    "b": Fraction(4135, 8),
    "c": Fraction(4345, 8),
    "d": Fraction(6145, 12),
}


@pytest.fixture(scope="session")
def nuclear():
    return parse_model((MODELS / "nuclear.json").read_text())


@pytest.fixture(scope="session")
def nuclear_templates():
    return parse_templates((MODELS / "nuclear_templates.json").read_text())


@pytest.fixture(scope="session")
def octagon_design():
    return json.loads((MODELS / "nuclear_octagon.json").read_text())


@pytest.fixture(scope="session")
def quartic_design():
    return json.loads((MODELS / "nuclear_quartic.json").read_text())
