"""Fischer-Burmeister reformulation of TCP(A, q).

``x`` solves the problem iff ``phi(problem, x) == 0``, where each component
is ``fb(x_i, F_i(x))`` with ``F(x) = A x^{m-1} + q``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from .errors import TcpInputError
from .tensor import DenseTensor, contract_m1, contract_m2, partial_symmetrize

# subgradient selection at the origin: alpha = beta = 1/sqrt(2)
ORIGIN_COEFF = 1.0 / math.sqrt(2.0) - 1.0


@dataclass(frozen=True, eq=False)
class TcpProblem:
    """The instance TCP(A, q); the tensor is stored partially symmetrized."""

    tensor: DenseTensor
    q: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (self.tensor.dim,):
            raise TcpInputError(
                f"q has shape {q.shape}, expected ({self.tensor.dim},)"
            )
        if not np.all(np.isfinite(q)):
            raise TcpInputError("q must be finite")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "tensor", partial_symmetrize(self.tensor))

    @property
    def order(self) -> int:
        return self.tensor.order

    @property
    def dim(self) -> int:
        return self.tensor.dim

    def F(self, x) -> np.ndarray:
        """``A x^{m-1} + q``."""
        return contract_m1(self.tensor, x) + self.q

    def with_q(self, q) -> TcpProblem:
        return TcpProblem(self.tensor, q)

    def to_json_obj(self) -> dict:
        return {"tensor": self.tensor.to_json_obj(), "q": [float(v) for v in self.q]}

    @classmethod
    def from_json_obj(cls, obj) -> TcpProblem:
        try:
            tensor = DenseTensor.from_json_obj(obj["tensor"])
            q = obj["q"]
        except (KeyError, TypeError) as exc:
            raise TcpInputError(f"problem object is missing field {exc}") from None
        return cls(tensor, q)


def load_problem(path: str | PathLike) -> TcpProblem:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TcpInputError(f"cannot read problem file {path}: {exc}") from exc
    return TcpProblem.from_json_obj(obj)


def save_problem(problem: TcpProblem, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(problem.to_json_obj(), fh)
        fh.write("\n")


def fb(a: float, b: float) -> float:
    """Fischer-Burmeister function ``sqrt(a^2 + b^2) - a - b``.

    Evaluated as ``-2ab / (r + a + b)`` when ``a + b > 0`` so that a huge
    partner does not swallow the other argument.
    """
    r = math.hypot(a, b)
    s = a + b
    return -2.0 * a * b / (r + s) if s > 0.0 else r - s


@dataclass(frozen=True)
class FbSubgradPair:
    """Partial derivatives ``(d/da, d/db)`` of ``fb`` (a selected element at 0)."""

    a_coeff: float
    b_coeff: float


def fb_subgrad(a: float, b: float) -> FbSubgradPair:
    s = max(abs(a), abs(b))
    if s == 0.0:
        return FbSubgradPair(ORIGIN_COEFF, ORIGIN_COEFF)
    # normalize first: hypot of subnormals rounds too coarsely
    a, b = a / s, b / s
    r = math.hypot(a, b)
    return FbSubgradPair(a / r - 1.0, b / r - 1.0)


def _vector(problem: TcpProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise TcpInputError(f"x has shape {x.shape}, expected ({problem.dim},)")
    return x


def phi(problem: TcpProblem, x) -> np.ndarray:
    x = _vector(problem, x)
    fx = problem.F(x)
    s = x + fx
    with np.errstate(invalid="ignore", divide="ignore"):
        alt = -2.0 * x * fx / (np.hypot(x, fx) + s)
    return np.where(s > 0.0, alt, np.hypot(x, fx) - s)


def residual(problem: TcpProblem, x) -> float:
    """``||phi(x)||_2``, the reported convergence quantity."""
    return float(np.linalg.norm(phi(problem, x)))


def merit(problem: TcpProblem, x) -> float:
    """``0.5 * ||phi(x)||^2``; zero exactly at solutions."""
    v = phi(problem, x)
    return 0.5 * float(v @ v)


def v_matrix(problem: TcpProblem, x) -> np.ndarray:
    """An element of the generalized Jacobian of ``phi`` at x.

    ``V = D_a + (m - 1) D_b M`` where ``M = A x^{m-2}`` and the diagonals hold
    the ``fb`` partials at each pair ``(x_i, F_i(x))``.
    """
    x = _vector(problem, x)
    mat = contract_m2(problem.tensor, x)
    fx = mat @ x + problem.q
    pairs = [fb_subgrad(xi, fi) for xi, fi in zip(x, fx)]
    da = np.array([p.a_coeff for p in pairs])
    db = np.array([p.b_coeff for p in pairs])
    return np.diag(da) + (problem.order - 1) * db[:, None] * mat


@dataclass(frozen=True)
class Violation:
    condition: str  # "x >= 0", "F(x) >= 0" or "x'F(x) = 0"
    index: int | None  # 1-based component, None for the complementarity sum
    magnitude: float

    def __str__(self):
        where = f" at index {self.index}" if self.index is not None else ""
        return f"{self.condition} violated{where} by {self.magnitude:.3e}"


@dataclass(frozen=True)
class Verification:
    tol: float
    violations: tuple[Violation, ...] = ()

    @property
    def is_solution(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.is_solution

    def __str__(self):
        if self.is_solution:
            return f"solution (tol={self.tol:g})"
        return "; ".join(str(v) for v in self.violations)


def verify_solution(problem: TcpProblem, x, tol: float = 1e-8) -> Verification:
    """Check ``x >= 0``, ``F(x) >= 0`` and ``|x'F(x)| <= tol`` (absolute)."""
    if not tol > 0:
        raise TcpInputError("tol must be positive")
    x = _vector(problem, x)
    fx = problem.F(x)
    found = []
    i = int(np.argmin(x))
    if x[i] < -tol:
        found.append(Violation("x >= 0", i + 1, float(-x[i])))
    j = int(np.argmin(fx))
    if fx[j] < -tol:
        found.append(Violation("F(x) >= 0", j + 1, float(-fx[j])))
    gap = float(x @ fx)
    if abs(gap) > tol:
        found.append(Violation("x'F(x) = 0", None, abs(gap)))
    return Verification(tol=tol, violations=tuple(found))
