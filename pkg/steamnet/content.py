from __future__ import annotations

import json
from pathlib import Path

from steamnet.errors import ConfigError

PACKAGE_DIR = Path(__file__).resolve().parent
DATA_DIR = PACKAGE_DIR / "data"
PRESET_DIR = PACKAGE_DIR / "presets"
TEMPLATE_DIR = PACKAGE_DIR / "templates"

SATURATION_TABLE = "saturation_table.json"

# Experiment-numbered names accepted for the bundled presets.
PRESET_ALIASES = {
    "step-5.1": "step",
    "periodic-5.2": "periodic",
    "oracle-5.3": "oracle",
}


def _load_json(path: Path, fallback):
    if not path.exists():
        return fallback
    return json.loads(path.read_text(encoding="utf-8-sig"))


def available_presets() -> list[str]:
    return sorted([p.stem for p in PRESET_DIR.glob("*.json")] + list(PRESET_ALIASES))


def load_saturation_table(path: Path | None = None) -> dict:
    table = _load_json(path or DATA_DIR / SATURATION_TABLE, None)
    if table is None:
        raise FileNotFoundError(f"Missing saturation table at {path or DATA_DIR / SATURATION_TABLE}")
    columns = table.get("columns") or []
    rows = table.get("rows") or []
    return {name: [float(row[i]) for row in rows] for i, name in enumerate(columns)} | {
        "source": table.get("source", ""),
    }


def load_preset(name: str) -> dict:
    key = (name or "").strip()
    key = PRESET_ALIASES.get(key, key)
    preset = _load_json(PRESET_DIR / f"{key}.json", None)
    if preset is None:
        raise ConfigError(
            f"unknown preset '{key}'; available: {', '.join(available_presets())}",
            field="preset",
        )
    return preset
