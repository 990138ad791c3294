"""Scenario files: JSON loading plus the scenarios shipped with the package."""

import json
from importlib import resources
from pathlib import Path

from ..errors import ConfigError
from ..model import Scenario


def parse_scenario(text, source="<string>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return Scenario.from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_scenario(path, check=True):
    """Parse a scenario file and run every validator on its default samples."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    scn = parse_scenario(path.read_text(), str(path))
    return scn.check() if check else scn


def bundled_names():
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir() if p.name.endswith(".json"))


def bundled(name):
    """One of the scenarios shipped with the package, e.g. ``bundled("reflected_quadratic")``."""
    f = resources.files(__name__) / f"{name}.json"
    if not f.is_file():
        raise ConfigError(f"no bundled scenario {name!r}; have {', '.join(bundled_names())}")
    return parse_scenario(f.read_text(), name).check()


def bundled_path(name):
    return Path(str(resources.files(__name__) / f"{name}.json"))
