"""Backend selection for the numerical kernels.

The compiled extension is used when importable; set ``TCPGDS_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("TCPGDS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_active = BACKENDS[BACKEND]

LIN, BS, PS, SPS = _pykernels.LIN, _pykernels.BS, _pykernels.PS, _pykernels.SPS


def get(name=None):
    """Return the kernel module ``name`` (default: the active backend)."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}"
        ) from None


def contract_m1(flat, m, n, x):
    return _active.contract_m1(flat, m, n, x)


def contract_m2(flat, m, n, x):
    return _active.contract_m2(flat, m, n, x)
