"""Dense real tensors of order m and dimension n.

Entries are held as an ``(n,) * m`` numpy array. File formats and the public
index conventions are 1-based; everything internal is 0-based.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from . import kernels
from .errors import TcpInputError


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """An order-``m``, dimension-``n`` real tensor (immutable)."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim < 2:
            raise TcpInputError(f"tensor order must be >= 2, got {arr.ndim}")
        n = arr.shape[0]
        if n < 1 or any(s != n for s in arr.shape):
            raise TcpInputError(f"tensor must be cubical, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise TcpInputError("tensor entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def order(self) -> int:
        return self.entries.ndim

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.entries.reshape(-1)

    def __repr__(self):
        return f"DenseTensor(order={self.order}, dim={self.dim}, nnz={self.nnz()})"

    def nnz(self) -> int:
        return int(np.count_nonzero(self.entries))

    def nonzeros(self) -> list[tuple[tuple[int, ...], float]]:
        """Nonzero entries as ``(1-based index tuple, value)`` pairs, row-major."""
        return [
            (tuple(int(i) + 1 for i in idx), float(self.entries[tuple(idx)]))
            for idx in np.argwhere(self.entries != 0)
        ]

    @classmethod
    def zeros(cls, order: int, dim: int) -> DenseTensor:
        return cls(np.zeros((dim,) * order))

    @classmethod
    def from_entries(cls, order: int, dim: int, entries) -> DenseTensor:
        """Build from ``[(i1, ..., im, value), ...]`` with 1-based indices.

        Unlisted entries are zero; a repeated index tuple is an error.
        """
        if order < 2 or dim < 1:
            raise TcpInputError(f"need order >= 2 and dim >= 1, got {order}, {dim}")
        arr = np.zeros((dim,) * order)
        seen = set()
        for row in entries:
            row = list(row)
            if len(row) != order + 1:
                raise TcpInputError(f"entry {row} must have {order} indices and a value")
            idx, value = row[:-1], row[-1]
            if any(isinstance(i, bool) or not isinstance(i, int) for i in idx):
                raise TcpInputError(f"indices must be integers: {row}")
            if any(i < 1 or i > dim for i in idx):
                raise TcpInputError(f"index out of range 1..{dim}: {row}")
            key = tuple(idx)
            if key in seen:
                raise TcpInputError(f"duplicate entry for index {key}")
            seen.add(key)
            arr[tuple(i - 1 for i in idx)] = float(value)
        return cls(arr)

    @classmethod
    def diagonal(cls, order: int, diag) -> DenseTensor:
        diag = np.asarray(diag, dtype=float)
        arr = np.zeros((diag.size,) * order)
        for k, d in enumerate(diag):
            arr[(k,) * order] = d
        return cls(arr)

    def to_json_obj(self) -> dict:
        return {
            "order": self.order,
            "dim": self.dim,
            "entries": [[*idx, v] for idx, v in self.nonzeros()],
        }

    @classmethod
    def from_json_obj(cls, obj) -> DenseTensor:
        try:
            order, dim, entries = obj["order"], obj["dim"], obj["entries"]
        except (KeyError, TypeError) as exc:
            raise TcpInputError(f"tensor object is missing field {exc}") from None
        if not isinstance(order, int) or not isinstance(dim, int):
            raise TcpInputError("'order' and 'dim' must be integers")
        return cls.from_entries(order, dim, entries)


def load_tensor(path: str | PathLike) -> DenseTensor:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TcpInputError(f"cannot read tensor file {path}: {exc}") from exc
    return DenseTensor.from_json_obj(obj)


def save_tensor(tensor: DenseTensor, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(tensor.to_json_obj(), fh)
        fh.write("\n")


def _vector(tensor: DenseTensor, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (tensor.dim,):
        raise TcpInputError(
            f"vector of shape {x.shape} does not match tensor dimension {tensor.dim}"
        )
    return x


def contract_m1(tensor: DenseTensor, x) -> np.ndarray:
    """The vector ``A x^{m-1}``: contract every index but the first with x."""
    x = _vector(tensor, x)
    return kernels.contract_m1(tensor.flat, tensor.order, tensor.dim, x)


def contract_m2(tensor: DenseTensor, x) -> np.ndarray:
    """The matrix ``A x^{m-2}``: contract indices 3..m with x.

    For a tensor symmetric in its trailing indices, ``(m - 1)`` times this
    matrix is the Jacobian of ``x -> A x^{m-1}``.
    """
    x = _vector(tensor, x)
    return kernels.contract_m2(tensor.flat, tensor.order, tensor.dim, x)


def partial_symmetrize(tensor: DenseTensor) -> DenseTensor:
    """Average entries over all permutations of indices 2..m.

    The result is symmetric in its trailing indices and has the same
    ``A x^{m-1}`` as the input.
    """
    m = tensor.order
    if m <= 2:
        return tensor
    arr = tensor.entries
    acc = np.zeros_like(arr)
    for perm in itertools.permutations(range(1, m)):
        acc += np.transpose(arr, (0, *perm))
    return DenseTensor(acc / math.factorial(m - 1))


def is_partially_symmetric(tensor: DenseTensor, atol: float = 0.0) -> bool:
    arr = tensor.entries
    for perm in itertools.permutations(range(1, tensor.order)):
        if not np.allclose(arr, np.transpose(arr, (0, *perm)), rtol=0.0, atol=atol):
            return False
    return True


@dataclass(frozen=True)
class PTensorVerdict:
    """Outcome of :func:`p_tensor_sample_check`.

    ``counterexample`` is None when no sampled direction violated the
    P-tensor condition; this is never a proof that the tensor is a P-tensor.
    """

    trials: int
    counterexample: np.ndarray | None = None
    score: float | None = None  # max_i x_i (A x^{m-1})_i at the counterexample

    @property
    def found(self) -> bool:
        return self.counterexample is not None


def p_tensor_sample_check(tensor: DenseTensor, trials: int = 10000, seed: int = 0) -> PTensorVerdict:
    """Search for a nonzero x with ``max_i x_i (A x^{m-1})_i <= 0``.

    The signed coordinate axes are tried first, then uniformly random
    directions on the unit sphere, ``trials`` directions in total.
    """
    if trials < 1:
        raise TcpInputError("trials must be >= 1")
    n = tensor.dim
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    axes = [s * eye[k] for k in range(n) for s in (1.0, -1.0)]
    for t in range(trials):
        if t < len(axes):
            x = axes[t]
        else:
            x = rng.standard_normal(n)
            norm = np.linalg.norm(x)
            if norm == 0.0:
                continue
            x = x / norm
        score = float(np.max(x * contract_m1(tensor, x)))
        if score <= 0.0:
            return PTensorVerdict(trials=t + 1, counterexample=x, score=score)
    return PTensorVerdict(trials=trials)
