"""Odd, monotonically increasing activation functions.

Specs are written as ``family[:key=value,...]``, e.g. ``lin``, ``bs:q=5``,
``ps:p=3,q=5`` or ``sps:p=3,q=7``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ConfigurationError


class Family(str, Enum):
    LINEAR = "lin"
    BIPOLAR_SIGMOID = "bs"
    POWER_SIGMOID = "ps"
    SMOOTH_POWER_SIGMOID = "sps"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def has_power(self) -> bool:
        return self in (Family.POWER_SIGMOID, Family.SMOOTH_POWER_SIGMOID)

    @property
    def has_gain(self) -> bool:
        return self is not Family.LINEAR


_CODES = {
    Family.LINEAR: kernels.LIN,
    Family.BIPOLAR_SIGMOID: kernels.BS,
    Family.POWER_SIGMOID: kernels.PS,
    Family.SMOOTH_POWER_SIGMOID: kernels.SPS,
}

_ALIASES = {
    "lin": Family.LINEAR,
    "linear": Family.LINEAR,
    "bs": Family.BIPOLAR_SIGMOID,
    "bipolar_sigmoid": Family.BIPOLAR_SIGMOID,
    "ps": Family.POWER_SIGMOID,
    "power_sigmoid": Family.POWER_SIGMOID,
    "sps": Family.SMOOTH_POWER_SIGMOID,
    "smooth_power_sigmoid": Family.SMOOTH_POWER_SIGMOID,
}


@dataclass(frozen=True)
class ActivationSpec:
    family: Family = Family.LINEAR
    p: int | None = None
    q_act: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        fam = self.family
        if fam.has_power:
            p = self.p
            if isinstance(p, float) and p.is_integer():
                p = int(p)
            if not isinstance(p, int) or isinstance(p, bool):
                raise ConfigurationError(f"{fam.value}: exponent p must be an integer, got {self.p!r}")
            if p < 3 or p % 2 == 0:
                raise ConfigurationError(f"{fam.value}: p must be an odd integer >= 3, got {p}")
            object.__setattr__(self, "p", p)
        elif self.p is not None:
            raise ConfigurationError(f"{fam.value}: takes no exponent p")
        if fam.has_gain:
            if self.q_act is None:
                raise ConfigurationError(f"{fam.value}: gain q is required")
            q = float(self.q_act)
            if not math.isfinite(q):
                raise ConfigurationError(f"{fam.value}: gain q must be finite")
            if fam is Family.POWER_SIGMOID:
                if q < 2:
                    raise ConfigurationError(f"ps: gain q must be >= 2, got {q:g}")
            elif q <= 2:
                raise ConfigurationError(f"{fam.value}: gain q must be > 2, got {q:g}")
            object.__setattr__(self, "q_act", q)
        elif self.q_act is not None:
            raise ConfigurationError(f"{fam.value}: takes no gain q")

    @property
    def label(self) -> str:
        """Canonical spec string, e.g. ``ps:p=5,q=7``."""
        parts = []
        if self.p is not None:
            parts.append(f"p={self.p}")
        if self.q_act is not None:
            parts.append(f"q={self.q_act:g}")
        return self.family.value + (":" + ",".join(parts) if parts else "")

    def __str__(self):
        return self.label

    def kernel_args(self) -> tuple[int, int, float]:
        return self.family.code, self.p or 0, self.q_act or 0.0


LINEAR = ActivationSpec()


def parse_activation(text: str, defaults: dict | None = None) -> ActivationSpec:
    """Parse ``family[:key=value,...]``.

    ``defaults`` maps a family to ``{"p": ..., "q": ...}`` used for any
    parameter the string leaves out.
    """
    text = text.strip()
    name, _, params = text.partition(":")
    try:
        family = _ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown activation family {name!r} in {text!r}") from None
    values = dict((defaults or {}).get(family, {}))
    if params.strip():
        for item in params.split(","):
            key, eq, val = item.partition("=")
            key = key.strip().lower()
            if not eq or key not in ("p", "q"):
                raise ConfigurationError(f"bad activation parameter {item!r} in {text!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigurationError(f"non-numeric value in {item!r}") from None
    p = values.get("p") if family.has_power else None
    q = values.get("q") if family.has_gain else None
    return ActivationSpec(family, p, q)


def parse_activation_list(text: str, defaults: dict | None = None) -> list[ActivationSpec]:
    specs = [parse_activation(s, defaults) for s in text.split(";") if s.strip()]
    if not specs:
        raise ConfigurationError("at least one activation is required")
    return specs


def _sigmoid(x: float, q: float) -> float:
    # (1+e^-q)/(1-e^-q) * (1-e^-qx)/(1+e^-qx) == tanh(qx/2) / tanh(q/2)
    return math.tanh(0.5 * q * x) / math.tanh(0.5 * q)


def apply_scalar(spec: ActivationSpec, x: float) -> float:
    fam = spec.family
    if fam is Family.LINEAR:
        return x
    if fam is Family.BIPOLAR_SIGMOID:
        return _sigmoid(x, spec.q_act)
    if fam is Family.POWER_SIGMOID:
        return x**spec.p if abs(x) >= 1.0 else _sigmoid(x, spec.q_act)
    return 0.5 * x**spec.p + _sigmoid(x, spec.q_act)


def apply_vector(spec: ActivationSpec, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array([apply_scalar(spec, float(t)) for t in v.ravel()]).reshape(v.shape)
