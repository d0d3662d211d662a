import pytest

ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def report(number, passed, detail, elapsed, limit=None):
        budget = f" / {limit:.0f}s" if limit else ""
        line = (f"criterion {number}: {'PASS' if passed else 'FAIL'}  "
                f"[{elapsed:.1f}s{budget}]  {detail}")
        lines[number] = line
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
