"""Plain-text ``key = value`` configuration files."""
from __future__ import annotations

import configparser
from pathlib import Path

_SECTION = "config"


class ConfigError(ValueError):
    pass


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return dict(cp[_SECTION])


def write_kv(path, values: dict, header: str | None = None):
    lines = [f"# {header}"] if header else []
    for k, v in values.items():
        lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_value(text: str):
    """Interpret a config string as bool, int, float, comma list, or str."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in t:
        return [parse_value(x) for x in t.split(",") if x.strip()]
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def typed(values: dict[str, str], defaults: dict) -> dict:
    """Merge string values over ``defaults``; unknown keys are a ConfigError."""
    out = dict(defaults)
    for k, v in values.items():
        if k not in defaults:
            raise ConfigError(f"unknown config key {k!r}")
        val = parse_value(v)
        d = defaults[k]
        try:
            if isinstance(d, bool):
                val = bool(val)
            elif isinstance(d, float):
                val = float(val)
            elif isinstance(d, int) and not isinstance(val, list):
                val = int(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k!r}: {v!r}") from exc
        out[k] = val
    return out
