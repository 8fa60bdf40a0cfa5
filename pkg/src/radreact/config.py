"""YAML scenario configuration with line-numbered validation errors."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from radreact.errors import ConfigError

KINDS = (
    "ld4_single",
    "sixd_single",
    "two_charge",
    "massless_admissibility",
    "divergence_scan",
    "interference_audit",
    "conformal_audit",
)


def _convert(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key in out:
                raise ConfigError(f"line {key_node.start_mark.line + 1}: duplicate key {key!r}")
            out[key] = _convert(value_node, path + (key,), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_convert(v, path + (i,), lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


class Section:
    """View on a mapping of the configuration that knows its source lines."""

    def __init__(self, data: dict, lines: dict, path: tuple = (), source: str = "<config>"):
        if not isinstance(data, dict):
            raise ConfigError(f"{source}:{lines.get(path, '?')}: expected a mapping at {'.'.join(map(str, path)) or 'top level'}")
        self.data = data
        self.lines = lines
        self.path = path
        self.source = source
        self._used: set = set()

    def where(self, key=None) -> str:
        p = self.path + ((key,) if key is not None else ())
        line = self.lines.get(p, self.lines.get(self.path, "?"))
        return f"{self.source}:{line}"

    def error(self, msg: str, key=None) -> ConfigError:
        name = ".".join(map(str, self.path + ((key,) if key is not None else ())))
        return ConfigError(f"{self.where(key)}: {name}: {msg}" if name else f"{self.where(key)}: {msg}")

    def __contains__(self, key):
        return key in self.data

    def get(self, key, default=None, kind=None):
        self._used.add(key)
        if key not in self.data or self.data[key] is None:
            return default
        return self._cast(key, self.data[key], kind)

    def require(self, key, kind=None):
        self._used.add(key)
        if key not in self.data or self.data[key] is None:
            raise self.error(f"missing required key {key!r}")
        return self._cast(key, self.data[key], kind)

    def _cast(self, key, value, kind):
        if kind is None:
            return value
        try:
            if kind == "vector":
                arr = np.asarray(value, dtype=float)
                if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                    raise ValueError
                return arr
            if kind == "matrix":
                arr = np.asarray(value, dtype=float)
                if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                    raise ValueError
                return arr
            if kind is bool:
                if not isinstance(value, bool):
                    raise ValueError
                return value
            if kind is float:
                if isinstance(value, bool):
                    raise ValueError
                out = float(value)
                if not np.isfinite(out):
                    raise ValueError
                return out
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise ValueError
                return int(value)
            return kind(value)
        except (TypeError, ValueError):
            label = kind if isinstance(kind, str) else kind.__name__
            raise self.error(f"expected {label}, got {value!r}", key) from None

    def section(self, key, required: bool = False) -> "Section | None":
        self._used.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                raise self.error(f"missing required section {key!r}")
            return None
        return Section(self.data[key], self.lines, self.path + (key,), self.source)

    def sections(self, key, required: bool = False) -> list:
        self._used.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                raise self.error(f"missing required list {key!r}")
            return []
        items = self.data[key]
        if not isinstance(items, list):
            raise self.error("expected a list", key)
        return [Section(item, self.lines, self.path + (key, i), self.source) for i, item in enumerate(items)]

    def check_unknown(self) -> None:
        extra = [k for k in self.data if k not in self._used]
        if extra:
            raise self.error(f"unknown key {extra[0]!r}", extra[0])


def parse_config(text: str, source: str = "<config>") -> Section:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else "?"
        raise ConfigError(f"{source}:{line}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if node is None:
        raise ConfigError(f"{source}:1: empty configuration")
    lines: dict = {}
    data = _convert(node, (), lines)
    root = Section(data, lines, (), source)
    kind = root.require("kind", str)
    if kind not in KINDS:
        raise root.error(f"unknown scenario kind {kind!r}; expected one of {', '.join(KINDS)}", "kind")
    return root


def load_config(path) -> Section:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=False)
