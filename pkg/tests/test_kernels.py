import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import brute_contract_m1
from tcpgds import kernels
from tcpgds.activation import parse_activation
from tcpgds.dynamics import GdsModel, IntegratorConfig, integrate
from tcpgds.ncp import TcpProblem
from tcpgds.tensor import DenseTensor

needs_both = pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="compiled kernels not built")


def _random_problem(rng, m, n):
    return TcpProblem(DenseTensor(rng.normal(size=(n,) * m)), rng.normal(size=n))


@pytest.mark.parametrize("m,n", [(2, 1), (2, 4), (3, 3), (4, 2), (5, 3), (6, 2)])
def test_contractions_match_brute_force(backend, m, n):
    rng = np.random.default_rng(m * 10 + n)
    t = DenseTensor(rng.normal(size=(n,) * m))
    x = rng.normal(size=n)
    mod = kernels.get(backend)
    np.testing.assert_allclose(mod.contract_m1(t.flat, m, n, x), brute_contract_m1(t.entries, x), rtol=1e-12, atol=1e-12)
    mat = mod.contract_m2(t.flat, m, n, x)
    assert mat.shape == (n, n)
    np.testing.assert_allclose(mat @ x, brute_contract_m1(t.entries, x), rtol=1e-12, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError, match="unavailable"):
        kernels.get("fortran")


def test_default_backend_is_compiled_when_available():
    forced = os.environ.get("TCPGDS_PURE_PYTHON", "") in ("1", "true", "yes")
    want = "cython" if "cython" in kernels.BACKENDS and not forced else "python"
    assert kernels.BACKEND == want


def test_env_var_forces_fallback():
    env = dict(os.environ, TCPGDS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from tcpgds import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_both
@pytest.mark.parametrize("act", ["lin", "bs:q=7", "ps:p=5,q=7", "sps:p=3,q=5"])
def test_step_functions_agree(act):
    rng = np.random.default_rng(3)
    for m, n in [(3, 3), (4, 2), (5, 4)]:
        pb = _random_problem(rng, m, n)
        spec = parse_activation(act)
        model = GdsModel(pb, spec)
        kc, kp = model.kernel("cython"), model.kernel("python")
        for _ in range(5):
            x = 0.5 * rng.normal(size=n)
            h = 10 ** rng.uniform(-4, -1)
            np.testing.assert_allclose(kc.rhs(x), kp.rhs(x), rtol=1e-12, atol=1e-13)
            k1 = kp.rhs(x)
            c = kc.dp45_step(x, k1, h, 1e-8, 1e-10)
            p = kp.dp45_step(x, k1, h, 1e-8, 1e-10)
            if not np.all(np.isfinite(p[1])):
                # overflowed trial step: both must flag it, nan vs inf may differ
                assert not np.all(np.isfinite(c[1]))
                continue
            np.testing.assert_allclose(c[0], p[0], rtol=1e-12, atol=1e-13)
            np.testing.assert_allclose(c[1], p[1], rtol=1e-11, atol=1e-12)
            assert c[2] == pytest.approx(p[2], rel=1e-6, abs=1e-5)  # roundoff-level estimate
            assert c[3] == pytest.approx(p[3], rel=1e-12, abs=1e-14)
            rc, rp = kc.rk4_step(x, h), kp.rk4_step(x, h)
            np.testing.assert_allclose(rc[0], rp[0], rtol=1e-12, atol=1e-13)
            assert rc[1] == pytest.approx(rp[1], rel=1e-12, abs=1e-14)


@needs_both
def test_activate_vectorized_agree():
    v = np.linspace(-3, 3, 601)
    for code, p, q in [(kernels.LIN, 0, 0.0), (kernels.BS, 0, 5.0), (kernels.PS, 3, 5.0), (kernels.SPS, 5, 9.0)]:
        np.testing.assert_allclose(
            kernels.get("cython").activate(code, p, q, v),
            kernels.get("python").activate(code, p, q, v),
            rtol=1e-14, atol=1e-15,
        )


def test_dp45_is_fifth_order(backend):
    # global error against a tiny-step reference shrinks like h^5
    pb = TcpProblem(DenseTensor.diagonal(3, [1.0, 2.0]), [-1.0, -2.0])
    kern = GdsModel(pb).kernel(backend)
    x0 = np.array([0.3, 0.4])

    def run(h, total=0.4):
        x = x0.copy()
        k = kern.rhs(x)
        for _ in range(int(round(total / h))):
            x, k, _, _ = kern.dp45_step(x, k, h, 1.0, 1.0)
        return x

    ref = run(0.4 / 6400)
    e1 = np.linalg.norm(run(0.4 / 80) - ref)
    e2 = np.linalg.norm(run(0.4 / 160) - ref)
    assert 4.6 < np.log2(e1 / e2) < 5.8


def test_rk4_is_fourth_order(backend):
    pb = TcpProblem(DenseTensor.diagonal(3, [1.0, 2.0]), [-1.0, -2.0])
    kern = GdsModel(pb).kernel(backend)
    x0 = np.array([0.3, 0.4])

    def run(h, total=0.4):
        x = x0.copy()
        for _ in range(int(round(total / h))):
            x, _ = kern.rk4_step(x, h)
        return x

    ref = run(0.4 / 6400)
    e1 = np.linalg.norm(run(0.4 / 40) - ref)
    e2 = np.linalg.norm(run(0.4 / 80) - ref)
    assert 3.7 < np.log2(e1 / e2) < 4.4


@needs_both
def test_integrate_same_on_both_backends():
    pb = TcpProblem(DenseTensor.diagonal(4, [1.0, 1.5, 0.7]), [-1.0, 0.5, -2.0])
    model = GdsModel(pb, parse_activation("sps:p=3,q=5"), 1e6)
    cfg = IntegratorConfig(record_every=5)
    a = integrate(model, (0.2, 0.9, 0.4), cfg, backend="cython")
    b = integrate(model, (0.2, 0.9, 0.4), cfg, backend="python")
    assert a.converged and b.converged
    assert abs(a.steps - b.steps) <= 2
    np.testing.assert_allclose(a.final_state, b.final_state, atol=1e-9)
