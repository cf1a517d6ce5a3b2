"""Versioned key = value table of calibrated constants.

Each line is ``name = value  # provenance``; values are written with
``repr`` so a save/load cycle reproduces them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

TABLE_VERSION = 1
SLACK = 1.05


@dataclass(frozen=True)
class Constant:
    name: str
    value: float
    provenance: str = ""


def default_path() -> Path:
    return Path(str(resources.files("bilinear_lab") / "data" / "constants.txt"))


def _parse_value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


class ConstantsTable:
    def __init__(self, entries: Optional[dict] = None, version: int = TABLE_VERSION):
        self.version = version
        self.entries: dict[str, Constant] = dict(entries or {})

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "ConstantsTable":
        path = Path(path) if path else default_path()
        table = cls()
        if not path.exists():
            return table
        for raw in path.read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            body, _, prov = line.partition("#")
            key, sep, val = body.partition("=")
            if not sep:
                raise ValueError(f"malformed constants line: {raw!r}")
            key = key.strip()
            if key == "version":
                table.version = int(val)
                continue
            table.entries[key] = Constant(key, _parse_value(val), prov.strip())
        return table

    def save(self, path: Optional[Path] = None) -> Path:
        path = Path(path) if path else default_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["# calibrated constants; verify compares against value x 1.05",
                 f"version = {self.version}"]
        for key in sorted(self.entries):
            c = self.entries[key]
            tail = f"  # {c.provenance}" if c.provenance else ""
            lines.append(f"{key} = {c.value!r}{tail}")
        path.write_text("\n".join(lines) + "\n")
        return path

    def get(self, name: str):
        if name not in self.entries:
            raise KeyError(f"constant {name!r} not calibrated; run `calibrate {name}`")
        return self.entries[name].value

    def set(self, name: str, value, provenance: str = "") -> None:
        self.entries[name] = Constant(name, value, provenance)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstantsTable) and self.version == other.version and self.entries == other.entries
