"""Pure numpy kernels.

Same interface as the compiled ``_ckernels`` module; used when the extension
is not built or when ``TCPGDS_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np

# activation family codes shared with the compiled kernels
LIN, BS, PS, SPS = 0, 1, 2, 3

_ORIGIN = 1.0 / math.sqrt(2.0)

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# difference between the 5th and embedded 4th order weights (7 stages, FSAL)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def contract_m2(flat, m, n, x):
    """Contract the last ``m - 2`` indices of a flat row-major tensor with x."""
    t = np.asarray(flat, dtype=float).reshape((n,) * m)
    for _ in range(m - 2):
        t = t @ x
    return np.array(t, dtype=float)


def contract_m1(flat, m, n, x):
    return contract_m2(flat, m, n, x) @ x


def activate(family, p, qact, v):
    v = np.asarray(v, dtype=float)
    if family == LIN:
        return v.copy()
    sig = np.tanh(0.5 * qact * v) / math.tanh(0.5 * qact)
    if family == BS:
        return sig
    power = v**p
    if family == PS:
        return np.where(np.abs(v) >= 1.0, power, sig)
    return 0.5 * power + sig


def fb_vec(a, b, r):
    # r - a - b cancels when a + b > 0; use -2ab / (r + a + b) there
    s = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        alt = -2.0 * a * b / (r + s)
    return np.where(s > 0.0, alt, r - s)


class GdsKernel:
    """Fused evaluation of the scaled-time flow ``-V^T f(Phi(x))``."""

    def __init__(self, flat, m, n, q, family, p, qact):
        self.flat = np.ascontiguousarray(flat, dtype=float)
        self.m = int(m)
        self.n = int(n)
        self.q = np.ascontiguousarray(q, dtype=float)
        self.family = int(family)
        self.p = int(p)
        self.qact = float(qact)

    def _eval(self, x):
        mat = contract_m2(self.flat, self.m, self.n, x)
        fx = mat @ x + self.q
        r = np.hypot(x, fx)
        phi = fb_vec(x, fx, r)
        # normalize by max(|x|, |fx|) so subnormal pairs keep unit length
        s = np.maximum(np.abs(x), np.abs(fx))
        nz = s > 0.0
        s = np.where(nz, s, 1.0)
        ua, ub = x / s, fx / s
        ru = np.where(nz, np.hypot(ua, ub), 1.0)
        da = np.where(nz, ua / ru, _ORIGIN) - 1.0
        db = np.where(nz, ub / ru, _ORIGIN) - 1.0
        vmat = (self.m - 1) * db[:, None] * mat
        vmat[np.diag_indices(self.n)] += da
        return vmat, phi

    def rhs(self, x):
        x = np.asarray(x, dtype=float)
        vmat, phi = self._eval(x)
        return -(vmat.T @ activate(self.family, self.p, self.qact, phi))

    def rhs_res(self, x):
        x = np.asarray(x, dtype=float)
        vmat, phi = self._eval(x)
        k = -(vmat.T @ activate(self.family, self.p, self.qact, phi))
        return k, math.sqrt(float(phi @ phi))

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        mat = contract_m2(self.flat, self.m, self.n, x)
        fx = mat @ x + self.q
        phi = fb_vec(x, fx, np.hypot(x, fx))
        return math.sqrt(float(phi @ phi))

    # trial steps may overflow; the caller rejects non-finite results
    @np.errstate(over="ignore", invalid="ignore")
    def dp45_step(self, x, k1, h, rtol, atol):
        """One Dormand-Prince step.

        Returns ``(x_new, k_new, err, res_new)`` where ``k_new`` is the flow at
        ``x_new`` (reusable as the next ``k1``), ``err`` the RMS scaled error
        estimate and ``res_new`` the residual norm at ``x_new``.
        """
        x = np.asarray(x, dtype=float)
        ks = [np.asarray(k1, dtype=float)]
        for s in range(1, 6):
            xs = x.copy()
            for j, a in enumerate(_A[s]):
                xs += h * a * ks[j]
            ks.append(self.rhs(xs))
        x_new = x.copy()
        for b, k in zip(_B, ks):
            x_new += h * b * k
        k_new, res_new = self.rhs_res(x_new)
        ks.append(k_new)
        err = np.zeros_like(x)
        for e, k in zip(_E, ks):
            err += h * e * k
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err_norm = math.sqrt(float(np.mean((err / scale) ** 2)))
        return x_new, k_new, err_norm, res_new

    @np.errstate(over="ignore", invalid="ignore")
    def rk4_step(self, x, h):
        x = np.asarray(x, dtype=float)
        k1 = self.rhs(x)
        k2 = self.rhs(x + 0.5 * h * k1)
        k3 = self.rhs(x + 0.5 * h * k2)
        k4 = self.rhs(x + h * k3)
        x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return x_new, self.residual(x_new)
