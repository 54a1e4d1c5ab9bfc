"""Collects one pass/fail line per acceptance criterion for the run summary."""

lines = []


def record(number, name, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    line = f"criterion {number} [{name}]: {verdict}"
    if detail:
        line += f" ({detail})"
    lines.append(line)
    print(line)


def record_skip(number, name, reason):
    line = f"criterion {number} [{name}]: SKIP ({reason})"
    lines.append(line)
    print(line)
