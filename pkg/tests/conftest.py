import pytest

from comoving import Circle, generate_annulus_mesh

_CRITERIA = {}


def _criterion_line(n, ok, detail):
    return f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion and print one line for it."""

    def record(n, ok, detail=""):
        _CRITERIA[n] = (bool(ok), detail)
        print(_criterion_line(n, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_criterion_line(n, *_CRITERIA[n]))


@pytest.fixture(scope="session")
def annulus_010():
    return generate_annulus_mesh(Circle(1.0), Circle(0.5), 0.1)


@pytest.fixture(scope="session")
def annulus_005():
    return generate_annulus_mesh(Circle(1.0), Circle(0.5), 0.05)
