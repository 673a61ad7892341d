"""Flat key-value text files.

One ``key = value`` pair per line, ``#`` starts a comment, blank lines
ignored.  Values are stored as Python reprs of floats/ints/strings so a
write/read round trip is exact.
"""

from __future__ import annotations


class KvError(ValueError):
    """Malformed key-value file content."""


def parse_value(text: str):
    """Parse a scalar: int, float, or bare string."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def loads(text: str) -> dict:
    """Parse key-value text into an ordered dict. Duplicate keys rejected."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise KvError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise KvError(f"line {lineno}: empty key")
        if key in out:
            raise KvError(f"line {lineno}: duplicate key {key!r}")
        val = val.strip()
        if val in ("true", "false"):
            out[key] = val == "true"
        else:
            out[key] = parse_value(val)
    return out


def dumps(pairs: dict, header: str | None = None) -> str:
    lines = []
    if header:
        for h in header.splitlines():
            lines.append(f"# {h}")
    for key, value in pairs.items():
        lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def load(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def save(path, pairs: dict, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(pairs, header=header))
