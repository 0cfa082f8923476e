import numpy as np
import pytest
from hypothesis import settings

from hdtzeno.hamiltonian import CouplingSpec, build

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_ising():
    """Two system qubits and one bath qubit with default ISING couplings."""
    return build(CouplingSpec(2, 1))


def random_unitary(dim, rng):
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def brute_force_tree(H, n_s, n_b, T, n):
    """Every measurement record with its probability and final system state.

    Independent of the package: the cycle is written out as dense matrices
    (``expm`` propagator, explicit bath projectors and reset) and the full
    ``N_b**n`` tree is expanded with no pruning.
    """
    import itertools

    import scipy.linalg

    N_s, N_b = 2**n_s, 2**n_b
    U = scipy.linalg.expm(-1j * H * (T / n))
    bath0 = np.zeros(N_b)
    bath0[0] = 1.0
    # outcome m: project the bath on |m>, then re-prepare |0>
    cycle = []
    for m in range(N_b):
        reset = np.zeros((N_b, N_b))
        reset[0, m] = 1.0
        cycle.append(np.kron(np.eye(N_s), reset) @ U)
    psi = np.zeros(N_s * N_b, dtype=complex)
    psi[0] = 1.0
    out = {}
    for record in itertools.product(range(N_b), repeat=n):
        v = psi
        for m in record:
            v = cycle[m] @ v
        p = float(np.vdot(v, v).real)
        system = v.reshape(N_s, N_b)[:, 0]
        out[record] = (p, system / np.sqrt(p) if p > 0 else system)
    return out


def naive_frame_potential(probs, states, K):
    total = 0.0
    for pi, a in zip(probs, states):
        for pj, b in zip(probs, states):
            total += pi * pj * abs(np.vdot(a, b)) ** (2 * K)
    return total


# one summary line per acceptance criterion, filled in by the report hook below
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[number] = (title, rep.passed and rep.when == "call", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
