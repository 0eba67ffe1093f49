import pytest

CRITERIA = {
    1: "operator gallery classification",
    2: "certificate pipeline",
    3: "Lorentz norm exactness",
    4: "Loomis-Whitney",
    5: "Gagliardo bound",
    6: "inequality verification",
    7: "reduction identity",
    8: "CLI reproducibility",
}

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    k = marker.args[0]
    if rep.when == "call" or rep.failed:
        ok = rep.passed and _results.get(k, (True, ""))[0]
        detail = "; ".join(f"{name}={value}" for name, value in item.user_properties)
        _results[k] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        if k not in _results:
            continue
        ok, detail = _results[k]
        line = f"criterion {k} ({CRITERIA[k]}): {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
