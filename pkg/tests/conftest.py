import pytest

acceptance_key = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[acceptance_key] = []


@pytest.fixture
def acceptance_log(request):
    """Append one summary line per acceptance criterion."""
    lines = request.config.stash[acceptance_key]

    def record(number, passed, detail):
        tag = "PASS" if passed else "FAIL"
        line = f"criterion {number:>2}: {tag}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(acceptance_key, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
