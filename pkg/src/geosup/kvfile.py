"""Flat ``key = value`` text files (calibration, configs, category mappings)."""

from __future__ import annotations

from .errors import ParseError


def parse_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Duplicate keys are rejected."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ParseError(f"{source}:{lineno}: duplicate key '{key}'")
        out[key] = value
    return out


def format_key_values(items, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"{k} = {v}" for k, v in items)
    return "\n".join(lines) + "\n"


def read_key_values(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_key_values(fh.read(), str(path))


def parse_floats(value: str, key: str, count: int | None = None, source: str = "<string>") -> list[float]:
    try:
        vals = [float(tok) for tok in value.replace(",", " ").split()]
    except ValueError:
        raise ParseError(f"{source}: key '{key}' has non-numeric value {value!r}") from None
    if count is not None and len(vals) != count:
        raise ParseError(f"{source}: key '{key}' needs {count} values, got {len(vals)}")
    return vals
