from importlib import resources

import pytest

from dynproof.proof import parse_proof


def fixture_text(name: str) -> str:
    return resources.files("dynproof").joinpath("fixtures", name).read_text()


@pytest.fixture(scope="session")
def cycle7_trace():
    return parse_proof(fixture_text("cycle7_table2.txt"))


@pytest.fixture(scope="session")
def petersen_trace():
    return parse_proof(fixture_text("petersen.txt"))


_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
