def pytest_terminal_summary(terminalreporter):
    """Echo one line per acceptance criterion, recorded through ``record_property``."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", None) != "call":
                continue
            for name, value in getattr(rep, "user_properties", []):
                if name == "acceptance":
                    lines.append((value[0], f"{'PASS' if rep.passed else 'FAIL'}  criterion {value[0]:>2d}: {value[1]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
