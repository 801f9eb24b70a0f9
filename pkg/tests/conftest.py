import pytest

acceptance_key = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(acceptance_key, [])

    def report(label: str, passed: bool, detail: str) -> bool:
        lines.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
