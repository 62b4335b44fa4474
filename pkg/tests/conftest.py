import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_walk(rng):
    return np.cumsum(rng.standard_normal(1500)) * 0.01 + 5.0


@pytest.fixture
def price_series(rng):
    from fracdiff_lstm.timeseries import PriceSeries

    dates = np.arange(np.datetime64("2014-01-01"), np.datetime64("2023-12-31"))
    dates = dates[np.is_busday(dates)]
    log_p = np.log(100.0) + np.cumsum(0.0003 + 0.01 * rng.standard_normal(dates.size))
    return PriceSeries("TEST", dates, np.exp(log_p))


# -- acceptance reporting ------------------------------------------------------

_criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    number, title = marker.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    if failed:
        reason = call.excinfo.exconly().splitlines()[0][:160]
        _criteria[number] = (title, "FAIL", reason)
    elif call.when == "call" or number not in _criteria:
        _criteria[number] = (title, "PASS", "")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, reason = _criteria[number]
        line = f"{status} criterion {number:>2}: {title}"
        terminalreporter.write_line(line + (f"  ({reason})" if reason else ""))
