import pathlib

import pytest

from arbocode.gog import load_gog

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "arbocode" / "data"
HERE = pathlib.Path(__file__).resolve().parent

DATA_FILES = sorted(DATA.glob("*.gog"))
_cache = {}


def gog(name):
    """Parsed shipped example (cached; tests must not mutate it)."""
    if name not in _cache:
        _cache[name] = load_gog(DATA / f"{name}.gog")
    return _cache[name]


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def load():
    return gog
