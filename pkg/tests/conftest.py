import itertools

import numpy as np
import pytest

from tcpgds import kernels
from tcpgds.harness import builtin_tensor


@pytest.fixture
def eg1():
    return builtin_tensor("eg1")


@pytest.fixture
def eg2():
    return builtin_tensor("eg2")


@pytest.fixture
def eg3():
    return builtin_tensor("eg3")


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return request.param


def brute_contract_m1(arr, x):
    """Direct summation of a_{i i2..im} x_{i2}...x_{im} over all index tuples."""
    m, n = arr.ndim, arr.shape[0]
    y = np.zeros(n)
    for idx in itertools.product(range(n), repeat=m):
        y[idx[0]] += arr[idx] * np.prod([x[j] for j in idx[1:]])
    return y


def central_jacobian(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.column_stack(cols)


# acceptance gate results: criterion -> list of (ok, detail)
GATE = {}


def gate_record(criterion, ok, detail):
    GATE.setdefault(criterion, []).append((bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not GATE:
        return
    terminalreporter.section("acceptance gate")
    for crit in sorted(GATE, key=int):
        parts = GATE[crit]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {crit}: {verdict}  {detail}")
