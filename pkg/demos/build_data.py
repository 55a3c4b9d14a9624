"""Regenerate the shipped example files in src/arbocode/data/ from the
constructors in arbocode.library."""

from pathlib import Path

from arbocode.gog import serialize_gog
from arbocode.library import CATALOG

DATA = Path(__file__).resolve().parents[1] / "src" / "arbocode" / "data"


def main():
    DATA.mkdir(exist_ok=True)
    for name, make in sorted(CATALOG.items()):
        path = DATA / f"{name}.gog"
        path.write_text(serialize_gog(make()), encoding="utf-8")
        print(f"wrote {path.relative_to(DATA.parents[2])}")


if __name__ == "__main__":
    main()
