import pytest

# label -> list of (passed, detail); filled by the acceptance tests, printed at the end of the run
ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def record():
    def _record(label: str, passed: bool, detail: str = ""):
        ACCEPTANCE.setdefault(label, []).append((bool(passed), detail))
        print(f"[acceptance] {label}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, parts in ACCEPTANCE.items():
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts if d)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
