"""Gradient dynamical system ``dx/dt = -gamma V^T f(Phi(x))`` and its integration.

Integration runs in scaled time ``tau = gamma * t``: gamma only relabels the
time axis, so the state path is independent of it and large gains do not
make the problem stiff. Trajectories carry both clocks.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .activation import LINEAR, ActivationSpec, apply_vector
from .errors import ConfigurationError, TcpInputError
from .ncp import TcpProblem, phi, v_matrix
from .tensor import DenseTensor


@dataclass(frozen=True)
class GdsModel:
    problem: TcpProblem
    activation: ActivationSpec = LINEAR
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigurationError(f"gamma must be a positive finite number, got {self.gamma}")

    def kernel(self, backend: str | None = None):
        """Fused scaled-time flow evaluator from the selected kernel backend."""
        pb = self.problem
        return kernels.get(backend).GdsKernel(
            pb.tensor.flat, pb.order, pb.dim, pb.q, *self.activation.kernel_args()
        )


def rhs(model: GdsModel, x) -> np.ndarray:
    """Right-hand side ``-gamma V^T f(Phi(x))`` in physical time."""
    x = np.asarray(x, dtype=float)
    v = v_matrix(model.problem, x)
    return -model.gamma * (v.T @ apply_vector(model.activation, phi(model.problem, x)))


class Method(str, Enum):
    RK4_FIXED = "rk4_fixed"
    RK45_ADAPTIVE = "rk45_adaptive"


class Status(str, Enum):
    CONVERGED = "converged"
    HORIZON_REACHED = "horizon_reached"
    STEP_FAILURE = "step_failure"


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings; ``step``, ``t_max`` are in scaled time."""

    method: Method = Method.RK45_ADAPTIVE
    step: float = 1e-2
    t_max: float = 100.0
    res_tol: float = 1e-8
    max_steps: int = 1_000_000
    record_every: int = 1
    # rtol/atol bound the state jitter once the step sits at the stability
    # limit; they must be well below res_tol / ||V|| for res_tol to be reachable
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("step", "t_max", "res_tol", "rtol", "atol"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ConfigurationError(f"{name} must be positive and finite, got {val}")
        for name in ("max_steps", "record_every"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "step": self.step,
            "t_max": self.t_max,
            "res_tol": self.res_tol,
            "max_steps": self.max_steps,
            "record_every": self.record_every,
            "rtol": self.rtol,
            "atol": self.atol,
        }


@dataclass
class Trajectory:
    tau: np.ndarray
    states: np.ndarray  # (len(tau), n)
    residuals: np.ndarray
    status: Status
    gamma: float = 1.0
    steps: int = 0
    rejected: int = 0
    message: str = ""

    @property
    def t(self) -> np.ndarray:
        """Physical time ``tau / gamma``."""
        return self.tau / self.gamma

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])

    def __len__(self):
        return len(self.tau)

    def to_csv(self) -> str:
        n = self.states.shape[1]
        buf = io.StringIO()
        buf.write(",".join(["tau", "t", *(f"x{i + 1}" for i in range(n)), "res"]) + "\n")
        for tau, t, x, r in zip(self.tau, self.t, self.states, self.residuals):
            row = [tau, t, *x, r]
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


class _Recorder:
    def __init__(self, every):
        self.every = every
        self.tau, self.states, self.res = [], [], []
        self._pending = None

    def add(self, k, tau, x, res):
        if k % self.every == 0:
            self.tau.append(tau)
            self.states.append(np.array(x))
            self.res.append(res)
            self._pending = None
        else:
            self._pending = (tau, np.array(x), res)

    def finish(self):
        if self._pending is not None:
            tau, x, res = self._pending
            self.tau.append(tau)
            self.states.append(x)
            self.res.append(res)
            self._pending = None


def integrate(model: GdsModel, x0, cfg: IntegratorConfig | None = None, backend: str | None = None) -> Trajectory:
    """Integrate the flow from ``x0`` until the residual drops to ``cfg.res_tol``.

    Stops with ``converged`` when ``||Phi(x)|| <= res_tol``, with
    ``horizon_reached`` at ``tau >= t_max`` or after ``max_steps`` accepted
    steps, and with ``step_failure`` when the adaptive step underflows or the
    state stops being finite.
    """
    cfg = cfg or IntegratorConfig()
    x = np.array(x0, dtype=float)
    if x.shape != (model.problem.dim,):
        raise TcpInputError(f"x0 has shape {x.shape}, expected ({model.problem.dim},)")
    kern = model.kernel(backend)
    rec = _Recorder(cfg.record_every)

    def done(status, steps, rejected, message=""):
        rec.finish()
        return Trajectory(
            tau=np.array(rec.tau),
            states=np.array(rec.states).reshape(len(rec.tau), -1),
            residuals=np.array(rec.res),
            status=status,
            gamma=model.gamma,
            steps=steps,
            rejected=rejected,
            message=message,
        )

    k, res = kern.rhs_res(x)
    rec.add(0, 0.0, x, res)
    if not (np.all(np.isfinite(x)) and math.isfinite(res)):
        return done(Status.STEP_FAILURE, 0, 0, "non-finite initial state")
    if res <= cfg.res_tol:
        return done(Status.CONVERGED, 0, 0)

    adaptive = cfg.method is Method.RK45_ADAPTIVE
    tau = 0.0
    h = cfg.step
    steps = rejected = 0
    while True:
        if steps >= cfg.max_steps:
            return done(Status.HORIZON_REACHED, steps, rejected, f"max_steps={cfg.max_steps} exhausted")
        h_min = 10.0 * np.spacing(max(abs(tau), 1.0))
        if cfg.t_max - tau <= h_min:
            return done(Status.HORIZON_REACHED, steps, rejected)
        if adaptive:
            h = min(h, cfg.t_max - tau)
            x_new, k_new, err, res_new = kern.dp45_step(x, k, h, cfg.rtol, cfg.atol)
            if not (math.isfinite(err) and err <= 1.0 and math.isfinite(res_new)):
                rejected += 1
                if math.isfinite(err) and math.isfinite(res_new):
                    h *= min(0.9, max(0.2, 0.9 * err**-0.2))
                else:
                    h *= 0.2
                if h < h_min:
                    return done(
                        Status.STEP_FAILURE, steps, rejected,
                        f"step size underflow at tau={tau!r}",
                    )
                continue
            tau_new = tau + h
            h *= 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
            k = k_new
        else:
            tau_new = min((steps + 1) * cfg.step, cfg.t_max)
            x_new, res_new = kern.rk4_step(x, tau_new - tau)
            if not (np.all(np.isfinite(x_new)) and math.isfinite(res_new)):
                return done(
                    Status.STEP_FAILURE, steps, rejected,
                    f"non-finite state after step {steps + 1} at tau={tau_new!r}",
                )
        steps += 1
        tau, x = tau_new, x_new
        rec.add(steps, tau, x, res_new)
        if res_new <= cfg.res_tol:
            return done(Status.CONVERGED, steps, rejected)


@dataclass(frozen=True)
class LyapunovReport:
    monotone: bool
    first_violation_index: int | None = None
    max_uptick: float = 0.0


def lyapunov_audit(traj: Trajectory) -> LyapunovReport:
    """Check that ``0.5 * res^2`` never increases along the recorded points.

    Tolerance is ``1e-10 * (1 + L(0))``. An uptick points at a too-large
    integration step rather than at the flow itself.
    """
    if len(traj.residuals) == 0:
        raise TcpInputError("empty trajectory")
    L = 0.5 * np.asarray(traj.residuals, dtype=float) ** 2
    tol = 1e-10 * (1.0 + L[0])
    up = np.diff(L)
    if up.size == 0:
        return LyapunovReport(True)
    bad = np.flatnonzero(up > tol)
    max_up = float(max(up.max(), 0.0))
    if bad.size == 0:
        return LyapunovReport(True, None, max_up)
    return LyapunovReport(False, int(bad[0]) + 1, max_up)


def diagonal_problem(diag, q, order: int) -> tuple[TcpProblem, np.ndarray]:
    """Diagonal TCP with positive diagonal and its closed-form solution.

    Componentwise ``d_k x^{m-1} + q_k`` complements ``x >= 0``, giving
    ``x_k = max(0, -q_k / d_k)^(1/(m-1))``.
    """
    d = np.asarray(diag, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(d <= 0):
        raise TcpInputError("diagonal entries must be positive")
    problem = TcpProblem(DenseTensor.diagonal(order, d), q)
    sol = np.maximum(0.0, -q / d) ** (1.0 / (order - 1))
    return problem, sol


def random_diagonal_problem(m: int, n: int, seed: int) -> tuple[TcpProblem, np.ndarray]:
    """Seeded diagonal instance: ``d ~ U(0.5, 2)``, ``q ~ U(-2, 2)``."""
    if m < 2 or n < 1:
        raise TcpInputError(f"need m >= 2 and n >= 1, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.5, 2.0, size=n)
    q = rng.uniform(-2.0, 2.0, size=n)
    return diagonal_problem(d, q, m)
