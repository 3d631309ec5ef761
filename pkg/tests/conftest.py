import numpy as np
import pytest

from eclipsekit import _backend, _fallback
from eclipsekit.corpus import make_synthetic_corpus
from eclipsekit.oracle import SyntheticOracle, SyntheticOracleSpec

try:
    from eclipsekit import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = [pytest.param(_fallback, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    return make_synthetic_corpus(n_images=3, size=16, seed=7)


@pytest.fixture
def two_label_spec(rng):
    templates = rng.normal(size=(2, 8, 8, 3))
    return SyntheticOracleSpec(templates, ("cat", "dog"), temperature=2.0)


@pytest.fixture
def exact_oracle(two_label_spec):
    """Synthetic oracle without 8-bit quantization."""
    return SyntheticOracle(two_label_spec, quantize=False)


def pytest_report_header(config):
    return f"eclipsekit kernel backend: {_backend.BACKEND}"


# --- acceptance reporting: one PASS/FAIL line per numbered criterion --------

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.skipped:
        return
    key = marker.args[0]
    if report.when == "call" or report.failed:
        ok = report.passed and _acceptance.get(key, (None, True))[1]
        _acceptance[key] = (marker.args[1], ok and report.outcome == "passed", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance):
        title, ok, duration = _acceptance[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {title}  ({duration:.1f} s)")
