import numpy as np
import pytest

from demograph.synth import SynthConfig, build_dataset, write_synth


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        prev = _CRITERIA.get(n)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[n] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}".rstrip())


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(seed=11, n_users=3000, months=2)


@pytest.fixture(scope="session")
def small_dataset(small_config):
    return build_dataset(small_config)


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory, small_config):
    out = tmp_path_factory.mktemp("synth")
    write_synth(small_config, out)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
