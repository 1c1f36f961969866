"""Gradient dynamical system solver for the tensor complementarity problem.

Finds ``x >= 0`` with ``A x^{m-1} + q >= 0`` and ``x'(A x^{m-1} + q) = 0`` by
integrating ``dx/dt = -gamma V^T f(Phi(x))`` over the Fischer-Burmeister
residual ``Phi``.
"""
from .activation import ActivationSpec, Family, apply_scalar, apply_vector, parse_activation
from .dynamics import (
    GdsModel,
    IntegratorConfig,
    Method,
    Status,
    Trajectory,
    diagonal_problem,
    integrate,
    lyapunov_audit,
    random_diagonal_problem,
    rhs,
)
from .errors import ConfigurationError, TcpInputError
from .kernels import BACKEND
from .ncp import TcpProblem, fb, fb_subgrad, merit, phi, residual, v_matrix, verify_solution
from .tensor import DenseTensor, contract_m1, contract_m2, partial_symmetrize, p_tensor_sample_check

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec", "Family", "apply_scalar", "apply_vector", "parse_activation",
    "GdsModel", "IntegratorConfig", "Method", "Status", "Trajectory", "diagonal_problem",
    "integrate", "lyapunov_audit", "random_diagonal_problem", "rhs",
    "ConfigurationError", "TcpInputError", "BACKEND",
    "TcpProblem", "fb", "fb_subgrad", "merit", "phi", "residual", "v_matrix", "verify_solution",
    "DenseTensor", "contract_m1", "contract_m2", "partial_symmetrize", "p_tensor_sample_check",
]
