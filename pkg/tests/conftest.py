import numpy as np
import pytest
from hypothesis import settings

from hkcma.spectrum import Mode, SingularFamily, SpectrumData, expand, singular_family

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

TWO_MODE = SpectrumData(0.0, (Mode(1, 1, 1), Mode(2, 1, 1)))


@pytest.fixture(scope="session")
def two_mode():
    return expand(TWO_MODE), TWO_MODE.nu


@pytest.fixture(scope="session")
def singular():
    fam = SingularFamily(1.5, 1.0, 0.3)
    return singular_family(fam), fam.nu


@pytest.fixture(scope="session")
def valid_points(two_mode):
    """Points of the two-mode spectrum with v > 0 and c^2 > |a|^2 (well away from the locus)."""
    from hkcma import geometry
    from hkcma.expsum import as_point, jet

    pot, nu = two_mode
    rng = np.random.default_rng(7)
    pts = []
    while len(pts) < 12:
        x = rng.uniform(-1, 1, 4)
        vj = jet(pot, as_point(x), 1)
        if vj[(0, 0, 0, 0)].real > 0 and geometry.singular_locus_value(vj, nu) > 1e-6 * geometry.abc(vj, nu).c ** 2:
            pts.append(x)
    return np.array(pts)


# -- acceptance summary ------------------------------------------------------
_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """record(number, passed, detail): log one acceptance line and return ``passed``."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
