from typing import Dict, List, Tuple

from app.core.exceptions import ConfigParseError, RangeSyntaxError


def parse_kv_text(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parse a flat ``key = value`` text into a dict of raw strings.

    Blank lines are skipped and ``#`` starts a comment anywhere on a line.

    Args:
        text (str): The file contents
        source (str): Name used in error messages

    Returns:
        dict: Raw values keyed by their exact key spelling

    Raises:
        ConfigParseError: On a line without ``=``, an empty key or value, or a repeated key
    """
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"{source}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigParseError(f"{source}:{lineno}: empty key or value in {raw_line!r}")
        if key in values:
            raise ConfigParseError(f"{source}:{lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def format_number(value) -> str:
    """Render ints as-is and floats with the shortest round-trip repr."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def parse_range(text: str) -> range:
    """
    Parse ``start:stop:step`` (stop exclusive) into a non-empty range.

    ``start:stop`` implies a step of 1.
    """
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise RangeSyntaxError(f"Invalid range '{text}': expected start:stop:step")
    try:
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError as e:
        raise RangeSyntaxError(f"Invalid range '{text}': {e}") from e
    if step < 1:
        raise RangeSyntaxError(f"Invalid range '{text}': step must be positive")
    values = range(start, stop, step)
    if len(values) == 0:
        raise RangeSyntaxError(f"Invalid range '{text}': empty")
    if start < 0:
        raise RangeSyntaxError(f"Invalid range '{text}': start must be non-negative")
    return values


def parse_int_list(text: str) -> List[int]:
    """Parse a comma-separated list of integers, e.g. ``1,2,4``."""
    try:
        values = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise RangeSyntaxError(f"Invalid integer list '{text}': {e}") from e
    if not values:
        raise RangeSyntaxError(f"Invalid integer list '{text}': empty")
    return values


def parse_float_list(text: str) -> List[float]:
    """Parse a comma-separated list of reals, e.g. ``0.9,1.0,1.1``."""
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise RangeSyntaxError(f"Invalid number list '{text}': {e}") from e
    if not values:
        raise RangeSyntaxError(f"Invalid number list '{text}': empty")
    return values


def render_table(headers: Tuple[str, ...], rows: List[Tuple]) -> str:
    """Left-aligned plain-text table for the human report format."""
    cells = [list(headers)] + [[format_number(v) if not isinstance(v, str) else v for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines)
