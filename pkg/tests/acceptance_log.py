"""Collects one line per acceptance criterion for the terminal summary."""

LINES = []


def record(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail}"
    LINES.append(line)
    print(line)
    return line
