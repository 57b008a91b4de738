import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.integrate import solve_ivp

from rydmis.subspace import build_is_basis, build_projected_hamiltonian, dense_matrix
from rydmis.udgraph import Graph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def path3():
    return Graph.from_edges(3, [(0, 1), (1, 2)])


def single():
    return Graph.from_edges(1, [])


def subspace(g):
    b = build_is_basis(g)
    return b, build_projected_hamiltonian(b)


def ode_anneal(h, omega0, delta0, T, psi0=None, rtol=1e-12, atol=1e-12):
    """Dense DOP853 integration of the ramp; independent of the Taylor kernels."""
    x = dense_matrix(h, 1.0, 0.0)
    d = dense_matrix(h, 0.0, 1.0)
    if psi0 is None:
        psi0 = np.zeros(h.basis.dim, dtype=complex)
        psi0[0] = 1.0

    def rhs(t, y):
        om = omega0 * np.sin(np.pi * t / T) ** 2
        de = delta0 * (2 * t / T - 1)
        return -1j * ((om * x + de * d) @ y)

    sol = solve_ivp(rhs, (0.0, T), psi0.astype(complex), method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting --------------------------------------------------------

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""

    def report(number, ok, detail, label="CRITERION"):
        line = f"{label} {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        _CRITERIA.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
