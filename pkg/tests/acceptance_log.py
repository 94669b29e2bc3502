"""Collects one PASS/FAIL line per acceptance criterion for the end-of-run summary."""

_LINES: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _LINES[number] = line
    print(line)
    return ok


def lines() -> list[str]:
    return [_LINES[k] for k in sorted(_LINES)]
