"""Bundled example instances."""
from __future__ import annotations

from importlib import resources

from .document import Document, parse_instance

URGENT_FIRST_COUNTEREXAMPLE = "urgent_first_counterexample"


def scenario_text(name: str) -> str:
    return resources.files("laca").joinpath("data", f"{name}.txt").read_text(encoding="utf-8")


def load(name: str) -> Document:
    return parse_instance(scenario_text(name))
