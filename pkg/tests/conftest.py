import pytest

CRITERIA = {
    1: "tableau identities, s <= 8, k1, k2 <= 20, to 1e-13",
    2: "energy drift table (dipole, h = 0.4, [0, 1e3])",
    3: "convergence rates 2s +- 0.3 (dipole, [0, 40])",
    4: "spectral regime at large h (tokamak, k = 20)",
    5: "solver robustness (dipole + quadratic potential)",
    6: "one-step symmetry within 10x solver tolerance",
    7: "residual equals naive Kronecker oracle to 1e-13",
    8: "field derivatives: second-order finite differences",
    9: "bitwise-identical CSV output across runs",
}

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or rep.failed:
        checks = _outcomes.setdefault(marker.args[0], {})
        checks[item.nodeid] = checks.get(item.nodeid, True) and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n not in _outcomes:
            continue
        checks = _outcomes[n]
        ok = sum(checks.values())
        verdict = "PASS" if ok == len(checks) else "FAIL"
        terminalreporter.write_line(
            f"CRITERION {n} [{verdict}] {CRITERIA[n]} ({ok}/{len(checks)} checks)")
