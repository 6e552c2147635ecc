def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines after the test run."""
    lines = []
    for group in ("passed", "failed"):
        for rep in terminalreporter.stats.get(group, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("criterion ", 1)[-1]):
            terminalreporter.write_line(line)
