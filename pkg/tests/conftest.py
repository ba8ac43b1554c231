import pytest

from cvdisc import ScenarioConfig, build_constellation


@pytest.fixture
def four_point():
    return build_constellation("four-point")


@pytest.fixture
def default_scenario(four_point):
    return ScenarioConfig(four_point, n=0.3, r_E=0.5, mu=0.6)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request, capsys):
    """Print and collect one PASS/FAIL line per acceptance criterion, then assert."""

    def emit(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        request.config.stash[_VERDICTS].append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
