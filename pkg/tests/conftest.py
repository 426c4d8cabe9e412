import numpy as np
import pytest

from micvar.process import VarCoefficients, companion_matrix


def random_stable_process(rng, k, p0, radius=None):
    """Dense random VAR(p0) rescaled to a target companion spectral radius.

    Multiplying A_i by c**i multiplies every companion eigenvalue by c.
    """
    mats = [rng.standard_normal((k, k)) for _ in range(p0)]
    r0 = np.max(np.abs(np.linalg.eigvals(companion_matrix(VarCoefficients(tuple(mats))))))
    target = rng.uniform(0.3, 0.9) if radius is None else radius
    c = target / r0
    coef = VarCoefficients(tuple(a * c ** (i + 1) for i, a in enumerate(mats)))
    b = rng.standard_normal((k, k))
    sigma = b @ b.T / k + 0.5 * np.eye(k)
    return coef, sigma


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> "PASS ..." / "FAIL ..." / "SKIP ..." line, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:>2}: {ACCEPTANCE[num]}")
