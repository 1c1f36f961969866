# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, cpow=True
"""Compiled kernels for the tensor contractions and the gradient flow.

Mirrors ``tcpgds._pykernels`` exactly; the two are cross-checked in the
test suite.
"""
from libc.math cimport sqrt, tanh, fabs, fmax, hypot
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    LIN = 0
    BS = 1
    PS = 2
    SPS = 3

cdef double ORIGIN = 0.70710678118654752440  # 1/sqrt(2)

# Dormand-Prince 5(4)
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

LIN_CODE, BS_CODE, PS_CODE, SPS_CODE = LIN, BS, PS, SPS


cdef void _contract_m2(const double* a, int m, int n, const double* x,
                       double* w1, double* w2, double* out) noexcept nogil:
    """out[n*n] <- tensor contracted with x over its last m-2 indices."""
    cdef Py_ssize_t size = 1, i, j, l
    cdef int step
    cdef const double* src = a
    cdef double* dst
    cdef double acc
    for step in range(m):
        size *= n
    if m == 2:
        for i in range(size):
            out[i] = a[i]
        return
    for step in range(m - 2):
        size //= n
        if step == m - 3:
            dst = out
        elif step % 2 == 0:
            dst = w1
        else:
            dst = w2
        for j in range(size):
            acc = 0.0
            for l in range(n):
                acc += src[j * n + l] * x[l]
            dst[j] = acc
        src = dst


cdef inline double _ipow(double v, int p) noexcept nogil:
    cdef double r = 1.0
    cdef int k
    for k in range(p):
        r *= v
    return r


cdef inline double _activate(int family, int p, double half_q, double scale,
                             double v) noexcept nogil:
    if family == LIN:
        return v
    if family == BS:
        return scale * tanh(half_q * v)
    if family == PS:
        if fabs(v) >= 1.0:
            return _ipow(v, p)
        return scale * tanh(half_q * v)
    return 0.5 * _ipow(v, p) + scale * tanh(half_q * v)


def _check(const double[::1] flat, int m, int n, const double[::1] x):
    if m < 2 or n < 1:
        raise ValueError("invalid tensor shape")
    if flat.shape[0] != n ** m:
        raise ValueError("tensor storage does not match order/dim")
    if x.shape[0] != n:
        raise ValueError("vector length does not match tensor dimension")


def contract_m2(flat, int m, int n, x):
    """Contract the last ``m - 2`` indices of a flat row-major tensor with x."""
    cdef const double[::1] a = np.ascontiguousarray(flat, dtype=np.float64).ravel()
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    _check(a, m, n, xv)
    cdef Py_ssize_t wsize = n ** (m - 1) if m > 2 else 1
    cdef double[::1] w1 = np.empty(wsize)
    cdef double[::1] w2 = np.empty(wsize)
    out = np.empty((n, n))
    cdef double[:, ::1] ov = out
    _contract_m2(&a[0], m, n, &xv[0], &w1[0], &w2[0], &ov[0, 0])
    return out


def contract_m1(flat, int m, int n, x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    mat = contract_m2(flat, m, n, xv)
    cdef double[:, ::1] mv = mat
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += mv[i, j] * xv[j]
        o[i] = acc
    return out


def activate(int family, int p, double qact, v):
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(vv.shape[0])
    cdef double[::1] o = out
    cdef double half_q = 0.5 * qact
    cdef double scale = 1.0 / tanh(half_q) if family != LIN else 1.0
    cdef Py_ssize_t i
    for i in range(vv.shape[0]):
        o[i] = _activate(family, p, half_q, scale, vv[i])
    return out


cdef inline double _fb(double a, double b, double r) noexcept nogil:
    # r - a - b cancels when a + b > 0; use -2ab / (r + a + b) there
    cdef double s = a + b
    if s > 0.0:
        return -2.0 * a * b / (r + s)
    return r - s


cdef class GdsKernel:
    """Fused evaluation of the scaled-time flow ``-V^T f(Phi(x))``."""

    cdef double[::1] a
    cdef double[::1] q
    cdef readonly int m, n, family, p
    cdef readonly double qact
    cdef double half_q, scale
    cdef double[::1] w1, w2, mat, fx, phi, da, db, act
    # stage storage for the RK steppers
    cdef double[::1] k2, k3, k4, k5, k6, xs

    def __init__(self, flat, int m, int n, q, int family, int p, double qact):
        self.a = np.ascontiguousarray(flat, dtype=np.float64).ravel().copy()
        self.q = np.ascontiguousarray(q, dtype=np.float64).copy()
        self.m = m
        self.n = n
        _check(self.a, m, n, self.q)
        self.family = family
        self.p = p
        self.qact = qact
        self.half_q = 0.5 * qact
        self.scale = 1.0 / tanh(self.half_q) if family != LIN else 1.0
        wsize = n ** (m - 1) if m > 2 else 1
        self.w1 = np.empty(wsize)
        self.w2 = np.empty(wsize)
        self.mat = np.empty(n * n)
        self.fx = np.empty(n)
        self.phi = np.empty(n)
        self.da = np.empty(n)
        self.db = np.empty(n)
        self.act = np.empty(n)
        self.k2 = np.empty(n)
        self.k3 = np.empty(n)
        self.k4 = np.empty(n)
        self.k5 = np.empty(n)
        self.k6 = np.empty(n)
        self.xs = np.empty(n)

    cdef double _flow(self, const double* x, double* out) noexcept nogil:
        """out <- -V^T f(Phi(x)); returns ||Phi(x)||_2."""
        cdef int n = self.n
        cdef Py_ssize_t i, j
        cdef double acc, r, s, ua, ub, ru, ss = 0.0
        cdef double* mat = &self.mat[0]
        cdef double c = self.m - 1
        _contract_m2(&self.a[0], self.m, n, x, &self.w1[0], &self.w2[0], mat)
        for i in range(n):
            acc = self.q[i]
            for j in range(n):
                acc += mat[i * n + j] * x[j]
            self.fx[i] = acc
            r = hypot(x[i], acc)
            self.phi[i] = _fb(x[i], acc, r)
            ss += self.phi[i] * self.phi[i]
            if r > 0.0:
                # normalize so subnormal pairs keep unit length
                s = fmax(fabs(x[i]), fabs(acc))
                ua = x[i] / s
                ub = acc / s
                ru = hypot(ua, ub)
                self.da[i] = ua / ru - 1.0
                self.db[i] = ub / ru - 1.0
            else:
                self.da[i] = ORIGIN - 1.0
                self.db[i] = ORIGIN - 1.0
            self.act[i] = _activate(self.family, self.p, self.half_q, self.scale,
                                    self.phi[i])
        # V = diag(da) + c diag(db) M ; out = -V^T act
        for j in range(n):
            acc = self.da[j] * self.act[j]
            for i in range(n):
                acc += c * self.db[i] * mat[i * n + j] * self.act[i]
            out[j] = -acc
        return sqrt(ss)

    def rhs(self, x):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        if xv.shape[0] != self.n:
            raise ValueError("vector length does not match tensor dimension")
        out = np.empty(self.n)
        cdef double[::1] o = out
        self._flow(&xv[0], &o[0])
        return out

    def rhs_res(self, x):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        if xv.shape[0] != self.n:
            raise ValueError("vector length does not match tensor dimension")
        out = np.empty(self.n)
        cdef double[::1] o = out
        cdef double res = self._flow(&xv[0], &o[0])
        return out, res

    def residual(self, x):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        if xv.shape[0] != self.n:
            raise ValueError("vector length does not match tensor dimension")
        cdef double[::1] tmp = np.empty(self.n)
        return self._flow(&xv[0], &tmp[0])

    def dp45_step(self, x, k1, double h, double rtol, double atol):
        """One Dormand-Prince step; see ``_pykernels.GdsKernel.dp45_step``."""
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] k1v = np.ascontiguousarray(k1, dtype=np.float64)
        cdef int n = self.n
        if xv.shape[0] != n or k1v.shape[0] != n:
            raise ValueError("vector length does not match tensor dimension")
        x_new = np.empty(n)
        k_new = np.empty(n)
        cdef double[::1] xn = x_new
        cdef double[::1] k7 = k_new
        cdef double* xs = &self.xs[0]
        cdef double* k2 = &self.k2[0]
        cdef double* k3 = &self.k3[0]
        cdef double* k4 = &self.k4[0]
        cdef double* k5 = &self.k5[0]
        cdef double* k6 = &self.k6[0]
        cdef Py_ssize_t i
        cdef double res, e, sc, acc = 0.0
        with nogil:
            for i in range(n):
                xs[i] = xv[i] + h * (A21 * k1v[i])
            self._flow(xs, k2)
            for i in range(n):
                xs[i] = xv[i] + h * (A31 * k1v[i] + A32 * k2[i])
            self._flow(xs, k3)
            for i in range(n):
                xs[i] = xv[i] + h * (A41 * k1v[i] + A42 * k2[i] + A43 * k3[i])
            self._flow(xs, k4)
            for i in range(n):
                xs[i] = xv[i] + h * (A51 * k1v[i] + A52 * k2[i] + A53 * k3[i]
                                     + A54 * k4[i])
            self._flow(xs, k5)
            for i in range(n):
                xs[i] = xv[i] + h * (A61 * k1v[i] + A62 * k2[i] + A63 * k3[i]
                                     + A64 * k4[i] + A65 * k5[i])
            self._flow(xs, k6)
            for i in range(n):
                xn[i] = xv[i] + h * (B1 * k1v[i] + B3 * k3[i] + B4 * k4[i]
                                     + B5 * k5[i] + B6 * k6[i])
            res = self._flow(&xn[0], &k7[0])
            for i in range(n):
                e = h * (E1 * k1v[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                         + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * (fabs(xv[i]) if fabs(xv[i]) > fabs(xn[i]) else fabs(xn[i]))
                acc += (e / sc) * (e / sc)
        return x_new, k_new, sqrt(acc / n), res

    def rk4_step(self, x, double h):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef int n = self.n
        if xv.shape[0] != n:
            raise ValueError("vector length does not match tensor dimension")
        x_new = np.empty(n)
        cdef double[::1] xn = x_new
        cdef double* xs = &self.xs[0]
        cdef double* k1 = &self.k2[0]
        cdef double* k2 = &self.k3[0]
        cdef double* k3 = &self.k4[0]
        cdef double* k4 = &self.k5[0]
        cdef Py_ssize_t i
        cdef double res
        with nogil:
            self._flow(&xv[0], k1)
            for i in range(n):
                xs[i] = xv[i] + 0.5 * h * k1[i]
            self._flow(xs, k2)
            for i in range(n):
                xs[i] = xv[i] + 0.5 * h * k2[i]
            self._flow(xs, k3)
            for i in range(n):
                xs[i] = xv[i] + h * k3[i]
            self._flow(xs, k4)
            for i in range(n):
                xn[i] = xv[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            res = self._flow(&xn[0], &self.k6[0])
        return x_new, res
