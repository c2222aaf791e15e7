import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=30,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GASHOMOTOPY_OUTPUT_DIR", str(tmp_path / "out"))
    return tmp_path / "out"


_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    # one verdict per item: the first failing phase, otherwise the call phase
    if any(nodeid == item.nodeid for nodeid, _, _ in _ACCEPTANCE):
        return
    if rep.failed or rep.when == "call":
        _ACCEPTANCE.append((item.nodeid, mark.args[0], "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, label, verdict in _ACCEPTANCE:
        terminalreporter.write_line(f"{verdict}  {label}")
    passed = sum(v == "PASS" for _, _, v in _ACCEPTANCE)
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE)} criteria passed")
