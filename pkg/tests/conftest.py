import pytest

_CRITERIA = {}


class CriterionLog:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.details = []
        self.ok = True

    def check(self, ok, detail: str):
        ok = bool(ok)
        self.ok &= ok
        self.details.append(("" if ok else "!") + detail)
        return ok

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        return f"{tag} criterion {self.number:2d} {self.title}: " + "; ".join(self.details)

    def finish(self):
        line = self.line()
        print(line)
        _CRITERIA[self.number] = line
        assert self.ok, line


@pytest.fixture
def criterion():
    return CriterionLog


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
