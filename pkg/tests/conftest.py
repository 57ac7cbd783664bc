import os

import pytest
from mpmath import mp

from starkforge.mpkernel import PrecisionCtx

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "starkforge", "data")
QUARTIC = os.path.abspath(os.path.join(DATA, "quartic.yaml"))
QI = os.path.abspath(os.path.join(DATA, "qi.yaml"))
HCF23 = os.path.abspath(os.path.join(DATA, "hcf23.yaml"))


@pytest.fixture(autouse=True)
def _ambient_precision():
    # the package never relies on mp.prec; keep it at the default so tests notice leaks
    mp.prec = 53
    yield
    mp.prec = 53


@pytest.fixture(scope="session")
def ctx128():
    return PrecisionCtx(128)


@pytest.fixture(scope="session")
def Q():
    from starkforge.fieldsdata import build_rational
    return build_rational()


@pytest.fixture(scope="session")
def F5():
    from starkforge.fieldsdata import build_quadratic_real
    return build_quadratic_real(5)


@pytest.fixture(scope="session")
def Ki():
    from starkforge.fieldsdata import build_imag_quadratic
    return build_imag_quadratic(1)


@pytest.fixture(scope="session")
def K23():
    from starkforge.fieldsdata import build_imag_quadratic
    return build_imag_quadratic(23)


@pytest.fixture(scope="session")
def K15():
    from starkforge.fieldsdata import build_imag_quadratic
    return build_imag_quadratic(15)


@pytest.fixture(scope="session")
def Kq():
    from starkforge.fieldsdata import ingest_field_file
    return ingest_field_file(QUARTIC)


@pytest.fixture(scope="session")
def ledger23(K23):
    from starkforge.eisen import delta_ledger
    return delta_ledger(K23, PrecisionCtx(256))


@pytest.fixture(scope="session")
def ledger_q(Kq):
    from starkforge.eisen import delta_ledger
    return delta_ledger(Kq, PrecisionCtx(128))


AC_LINES = []


def pytest_terminal_summary(terminalreporter):
    if AC_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(AC_LINES):
            terminalreporter.write_line(line)
