"""Bundled example programs, their reference outputs and placement files."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..desugar import desugar
from ..parser import parse

NAMES = ("geometric", "geometric_res", "beta", "beta_obs", "seq", "seq_gauss", "seq_bare", "loop",
         "unit", "aircraft", "crbd")


def _dir() -> Path:
    return Path(str(resources.files(__name__)))


def model_path(name: str) -> Path:
    p = _dir() / f"{name}.ppl"
    if not p.exists():
        raise FileNotFoundError(f"no bundled model {name!r}")
    return p


def resolve(path_or_name: str) -> Path:
    """An existing file, else a bundled model named by ``path_or_name`` (stem is used)."""
    p = Path(path_or_name)
    if p.exists():
        return p
    return model_path(p.stem if p.suffix == ".ppl" else p.name)


def source(name: str) -> str:
    return model_path(name).read_text()


@lru_cache(maxsize=None)
def load_model(name: str):
    return desugar(parse(source(name)))


def load_fixtures() -> dict:
    return json.loads((_dir() / "expected.json").read_text())


def load_placements(name: str) -> dict:
    return json.loads((_dir() / f"{name}_placements.json").read_text())
