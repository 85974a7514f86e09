"""Dense cubical tensors: mode products, diagonals, traces and symmetry checks.

All tensors here are cubical (every mode has the same dimension ``n``) and are
stored densely in row-major (lexicographic) order. Modes are numbered from 0.

The mode product follows the usual convention in which the matrix is summed
on its *second* index::

    (T x_p M)[..., i, ...] = sum_l M[i, l] * T[..., l, ...]
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, Literal, Union

import numpy as np

__all__ = [
    "DenseTensor",
    "SymmetryTag",
    "contract_mode",
    "multi_transform",
    "diagonal",
    "tensor_trace",
    "frob_norm",
    "check_symmetry",
    "symmetrize",
    "read_ten",
    "write_ten",
]

DEFAULT_SYMMETRY_RTOL = 1e-10


class DenseTensor:
    """Immutable cubical tensor of order ``d`` and dimension ``n``.

    Parameters
    ----------
    values : array_like
        Either an array of shape ``(n,) * d`` or a flat sequence of length
        ``n**d`` (in which case ``order`` and ``dim`` are required).
    order, dim : int, optional
        Needed only when ``values`` is flat.
    """

    __slots__ = ("_data",)

    def __init__(self, values, order: int | None = None, dim: int | None = None):
        data = np.array(values)
        if data.dtype.kind not in "fc":
            data = data.astype(float)
        if order is not None or dim is not None:
            if order is None or dim is None:
                raise ValueError("order and dim must be given together")
            if data.size != dim**order:
                raise ValueError(f"expected {dim**order} values, got {data.size}")
            data = data.reshape((dim,) * order)
        if data.ndim == 0:
            raise ValueError("tensor order must be positive")
        if len(set(data.shape)) != 1:
            raise ValueError(f"tensor must be cubical, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        data.flags.writeable = False
        self._data = data

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def order(self) -> int:
        return self._data.ndim

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def field(self) -> str:
        return "complex" if np.iscomplexobj(self._data) else "real"

    @property
    def values(self) -> np.ndarray:
        """Flat view in lexicographic order."""
        return self._data.reshape(-1)

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self) -> str:
        return f"DenseTensor(order={self.order}, dim={self.dim}, field={self.field})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            np.array_equal(self._data, other._data)
        )

    __hash__ = None


TensorLike = Union[DenseTensor, np.ndarray]


def _arr(T) -> np.ndarray:
    return T.data if isinstance(T, DenseTensor) else np.asarray(T)


def _like(T, data: np.ndarray):
    return DenseTensor(data) if isinstance(T, DenseTensor) else data


@dataclass(frozen=True)
class SymmetryTag:
    """Which symmetry a tensor is expected to carry.

    ``tolerance`` is relative to the Frobenius norm of the tensor.
    """

    kind: Literal["none", "fully-symmetric", "hermitian-paired"] = "fully-symmetric"
    tolerance: float = DEFAULT_SYMMETRY_RTOL

    def __post_init__(self):
        if self.kind not in ("none", "fully-symmetric", "hermitian-paired"):
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")


def contract_mode(T: TensorLike, M, p: int):
    """Mode-``p`` product ``T x_p M`` computed through the mode-``p`` unfolding.

    Real matrices may act on complex tensors and vice versa; the result takes
    the promoted dtype.
    """
    A = _arr(T)
    M = np.asarray(M)
    if not 0 <= p < A.ndim:
        raise ValueError(f"mode {p} out of range for order {A.ndim}")
    n = A.shape[p]
    if M.shape != (n, n):
        raise ValueError(f"matrix shape {M.shape} does not match dimension {n}")
    # unfold: bring mode p to the front, flatten the rest
    unfolded = np.moveaxis(A, p, 0).reshape(n, -1)
    folded = (M @ unfolded).reshape((n,) + tuple(np.delete(A.shape, p)))
    return _like(T, np.moveaxis(folded, 0, p))


def multi_transform(T: TensorLike, U, conj_modes: Iterable[int] = (), plain_modes: Iterable[int] | None = None):
    """Apply ``U^H`` on ``conj_modes`` and ``U^T`` on ``plain_modes``.

    With ``conj_modes`` empty this is the real transform
    ``T x_1 U^T x_2 ... x_d U^T``. If ``plain_modes`` is omitted it defaults to
    the complement of ``conj_modes``.
    """
    A = _arr(T)
    U = np.asarray(U)
    conj_modes = set(conj_modes)
    plain_modes = set(range(A.ndim)) - conj_modes if plain_modes is None else set(plain_modes)
    if conj_modes & plain_modes:
        raise ValueError("conj_modes and plain_modes overlap")
    if conj_modes | plain_modes != set(range(A.ndim)):
        raise ValueError("conj_modes and plain_modes must cover every mode")
    UT = U.T
    UH = U.conj().T
    out = A
    for p in range(A.ndim):
        out = contract_mode(out, UH if p in conj_modes else UT, p)
    return _like(T, out)


def diagonal(T: TensorLike) -> np.ndarray:
    A = _arr(T)
    idx = np.arange(A.shape[0])
    return A[(idx,) * A.ndim]


def tensor_trace(T: TensorLike):
    """Sum of the entries whose indices are all equal."""
    return diagonal(T).sum()


def frob_norm(T: TensorLike) -> float:
    A = _arr(T)
    return float(np.sqrt(np.sum(A.real**2 + A.imag**2)))


def _hermitian_swap(A: np.ndarray) -> np.ndarray:
    d = A.ndim // 2
    return A.transpose(tuple(range(d, 2 * d)) + tuple(range(d))).conj()


def check_symmetry(T: TensorLike, tag: SymmetryTag = SymmetryTag()) -> tuple[bool, float]:
    """Test a tensor for the symmetry in ``tag``.

    Returns
    -------
    ok : bool
        Whether the largest violation is within ``tag.tolerance * ||T||``.
    violation : float
        Largest absolute entrywise violation found.

    For ``fully-symmetric`` every transposition of two adjacent modes is
    checked (they generate the full permutation group). For
    ``hermitian-paired`` the identity
    ``B[i_1..i_d, j_1..j_d] == conj(B[j_1..j_d, i_1..i_d])`` is checked.
    """
    A = _arr(T)
    if tag.kind == "none":
        return True, 0.0
    if tag.kind == "hermitian-paired":
        if A.ndim % 2:
            raise ValueError("hermitian-paired symmetry needs an even order")
        violation = float(np.max(np.abs(A - _hermitian_swap(A))))
    else:
        violation = 0.0
        for p in range(A.ndim - 1):
            perm = list(range(A.ndim))
            perm[p], perm[p + 1] = perm[p + 1], perm[p]
            violation = max(violation, float(np.max(np.abs(A - A.transpose(perm)))))
    return violation <= tag.tolerance * frob_norm(A), violation


def symmetrize(T: TensorLike):
    """Average over all mode permutations."""
    A = _arr(T)
    perms = list(itertools.permutations(range(A.ndim)))
    out = sum(A.transpose(perm) for perm in perms) / math.factorial(A.ndim)
    return _like(T, out)


# ---------------------------------------------------------------------------
# ".ten" text format
#
#   order <d> dim <n> field real|complex
#   <values in lexicographic order; complex entries as "re im" pairs>
#
# '#' starts a comment anywhere on a line.
# ---------------------------------------------------------------------------


def write_ten(T: TensorLike, path: str | os.PathLike, per_line: int | None = None) -> None:
    A = _arr(T)
    n = A.shape[0]
    complex_field = np.iscomplexobj(A)
    per_line = per_line or n
    flat = A.reshape(-1)
    lines = [f"order {A.ndim} dim {n} field {'complex' if complex_field else 'real'}"]
    for start in range(0, flat.size, per_line):
        chunk = flat[start:start + per_line]
        if complex_field:
            lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in chunk))
        else:
            lines.append(" ".join(repr(float(x)) for x in chunk))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ten(path: str | os.PathLike) -> DenseTensor:
    with open(path, encoding="ascii") as fh:
        lines = [line.split("#", 1)[0].strip() for line in fh]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError(f"{path}: empty tensor file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "order" or head[2] != "dim" or head[4] != "field":
        raise ValueError(f"{path}: malformed header {lines[0]!r}")
    order, dim, field = int(head[1]), int(head[3]), head[5]
    if field not in ("real", "complex"):
        raise ValueError(f"{path}: unknown field {field!r}")
    # float() is locale independent
    tokens = [float(tok) for line in lines[1:] for tok in line.split()]
    count = dim**order
    if field == "complex":
        if len(tokens) != 2 * count:
            raise ValueError(f"{path}: expected {2 * count} numbers, got {len(tokens)}")
        raw = np.array(tokens).reshape(-1, 2)
        values = raw[:, 0] + 1j * raw[:, 1]
    else:
        if len(tokens) != count:
            raise ValueError(f"{path}: expected {count} numbers, got {len(tokens)}")
        values = np.array(tokens)
    return DenseTensor(values, order=order, dim=dim)
