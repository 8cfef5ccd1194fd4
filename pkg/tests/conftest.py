import pytest

# outcome lines for the acceptance criteria, printed at the end of the run
ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    marker = next((m for m in report.keywords if m.startswith("criterion_")), None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            outcome = "XFAIL (known unattainable, see ledger)"
        elif report.passed:
            outcome = "PASS"
        elif report.skipped:
            outcome = "SKIP"
        else:
            outcome = "FAIL"
        name = report.nodeid.split("::")[-1]
        props = dict(report.user_properties)
        if "budget_s" in props and report.when == "call":
            over = " OVER BUDGET" if report.duration > props["budget_s"] else ""
            outcome += f" ({report.duration:.1f} s of {props['budget_s']} s{over})"
        prev = ACCEPTANCE.get(marker, "")
        ACCEPTANCE[marker] = (prev + "; " if prev else "") + f"{name}: {outcome}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("_")[1])):
        terminalreporter.write_line(f"criterion {key.split('_')[1]:>2}  {ACCEPTANCE[key]}")


def pytest_configure(config):
    for i in range(1, 13):
        config.addinivalue_line("markers", f"criterion_{i}: acceptance criterion {i}")


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    return out
