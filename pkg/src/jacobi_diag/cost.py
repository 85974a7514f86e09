"""Objective functions on O(n) and U(n) and their restrictions to one plane.

Three families are supported:

``RealSymmetric``
    ``f(Q) = sum_l ||diag(A_l x_1 Q^T ... x_d Q^T)||^2`` for real symmetric
    tensors ``A_l`` of a common order.
``ComplexGeneral``
    ``f(U) = sum_l alpha_l ||diag(W_l)||^2`` where ``W_l`` applies ``U^H`` on
    the first ``t_l`` modes of ``A_l`` and ``U^T`` on the remaining ones.
``TraceForm``
    ``f(U) = tr(B x_1 U^H ... x_d U^H x_{d+1} U^T ... x_{2d} U^T)`` for a
    Hermitian-paired tensor ``B`` of order ``2d``.

Internally every family is a list of :class:`Term` objects, and
:class:`CostState` caches the transformed tensors for a current point so that
the value after one elementary rotation is computed from the ``2 x ... x 2``
sub-block in the rotated plane only.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .kernels import group_drift
from .rotations import apply_block_inplace, givens_block, psi_block
from .tensor import (
    DenseTensor,
    SymmetryTag,
    check_symmetry,
    frob_norm,
    multi_transform,
    read_ten,
    write_ten,
)

__all__ = [
    "Term",
    "RealSymmetric",
    "ComplexGeneral",
    "TraceForm",
    "NamedCost",
    "CostState",
    "evaluate",
    "transformed_tensors",
    "restricted_samples_real",
    "restricted_value_complex",
    "build_hermitian_form",
    "save_manifest",
    "load_manifest",
]

TRACE_IMAG_RTOL = 1e-10


@dataclass(frozen=True)
class Term:
    tensor: np.ndarray
    conj: tuple[bool, ...]
    weight: float = 1.0
    kind: Literal["diag", "trace"] = "diag"


def _as_tensor(T) -> DenseTensor:
    return T if isinstance(T, DenseTensor) else DenseTensor(T)


@dataclass(frozen=True)
class RealSymmetric:
    """Sum of squared diagonals of real symmetric tensors, maximized on O(n)."""

    tensors: tuple[DenseTensor, ...]
    tolerance: float = 1e-10

    group = "orthogonal"

    def __post_init__(self):
        tensors = tuple(_as_tensor(T) for T in self.tensors)
        if not tensors:
            raise ValueError("need at least one tensor")
        shapes = {T.data.shape for T in tensors}
        if len(shapes) != 1:
            raise ValueError(f"tensors must share order and dimension, got {shapes}")
        for k, T in enumerate(tensors):
            if T.field != "real":
                raise ValueError(f"tensor {k} is complex; RealSymmetric needs real tensors")
            ok, viol = check_symmetry(T, SymmetryTag("fully-symmetric", self.tolerance))
            if not ok:
                raise ValueError(f"tensor {k} is not symmetric (violation {viol:.2e})")
        object.__setattr__(self, "tensors", tensors)

    @property
    def dim(self) -> int:
        return self.tensors[0].dim

    @property
    def order(self) -> int:
        return self.tensors[0].order

    def expanded_terms(self) -> list[Term]:
        return [Term(T.data, (False,) * T.order) for T in self.tensors]


@dataclass(frozen=True)
class ComplexGeneral:
    """Weighted sum of squared diagonals with ``U^H`` on the first ``t`` modes.

    ``terms`` holds ``(tensor, t, alpha)`` triples. Weights may be negative.
    """

    terms: tuple[tuple[DenseTensor, int, float], ...]

    group = "unitary"

    def __post_init__(self):
        terms = []
        for A, t, alpha in self.terms:
            A = _as_tensor(A)
            t = int(t)
            alpha = float(alpha)
            if not 0 <= t <= A.order:
                raise ValueError(f"t={t} outside 0..{A.order}")
            if not np.isfinite(alpha):
                raise ValueError("weights must be finite")
            terms.append((A, t, alpha))
        if not terms:
            raise ValueError("need at least one term")
        if len({A.dim for A, _, _ in terms}) != 1:
            raise ValueError("all tensors must share the dimension n")
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def dim(self) -> int:
        return self.terms[0][0].dim

    @property
    def order(self) -> int:
        return max(A.order for A, _, _ in self.terms)

    def expanded_terms(self) -> list[Term]:
        return [
            Term(A.data, tuple(m < t for m in range(A.order)), alpha)
            for A, t, alpha in self.terms
        ]


@dataclass(frozen=True)
class TraceForm:
    """``tr`` of a Hermitian-paired order-``2d`` tensor transformed by ``U``."""

    B: DenseTensor
    tolerance: float = 1e-10

    group = "unitary"

    def __post_init__(self):
        B = _as_tensor(self.B)
        if B.order % 2:
            raise ValueError("trace form needs an even-order tensor")
        ok, viol = check_symmetry(B, SymmetryTag("hermitian-paired", self.tolerance))
        if not ok:
            raise ValueError(f"tensor is not Hermitian-paired (violation {viol:.2e})")
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.B.dim

    @property
    def order(self) -> int:
        return self.B.order // 2

    def expanded_terms(self) -> list[Term]:
        d = self.order
        return [Term(self.B.data, (True,) * d + (False,) * d, 1.0, "trace")]


CostSpec = RealSymmetric | ComplexGeneral | TraceForm


@dataclass(frozen=True)
class NamedCost:
    """Presets for the classical ICA objectives.

    ``"jade"`` takes ``matrices``; ``"complex3"`` takes ``tensor`` (order 3);
    ``"complex4-trace"`` takes ``tensor`` (order 4, Hermitian-paired);
    ``"real"`` takes ``tensors`` (real symmetric, any common order).
    """

    preset: Literal["jade", "complex3", "complex4-trace", "real"]
    params: dict = field(default_factory=dict)

    def expand(self) -> CostSpec:
        p = self.params
        if self.preset == "jade":
            return ComplexGeneral(tuple((np.asarray(A, dtype=complex), 1, 1.0) for A in p["matrices"]))
        if self.preset == "complex3":
            A = np.asarray(p["tensor"], dtype=complex)
            if A.ndim != 3:
                raise ValueError("complex3 needs an order-3 tensor")
            return ComplexGeneral(((A, 1, 1.0),))
        if self.preset == "complex4-trace":
            B = np.asarray(p["tensor"], dtype=complex)
            if B.ndim != 4:
                raise ValueError("complex4-trace needs an order-4 tensor")
            return TraceForm(B)
        if self.preset == "real":
            return RealSymmetric(tuple(p["tensors"]))
        raise ValueError(f"unknown preset {self.preset!r}")


# ---------------------------------------------------------------------------
# cached evaluation
# ---------------------------------------------------------------------------


def _check_point(spec, X) -> np.ndarray:
    X = np.asarray(X)
    n = spec.dim
    if X.shape != (n, n):
        raise ValueError(f"point has shape {X.shape}, expected {(n, n)}")
    if spec.group == "orthogonal" and np.iscomplexobj(X):
        raise ValueError("orthogonal-group cost evaluated at a complex matrix")
    drift = group_drift(X)
    if drift > 1e-8:
        warnings.warn(f"point is off the {spec.group} group (drift {drift:.1e})", stacklevel=3)
    return X


def _diag_entries(S: np.ndarray, conj: Sequence[bool], blocks: np.ndarray, p: int) -> np.ndarray:
    """Entry ``(p, ..., p)`` of ``S`` transformed by each 2x2 block, batched."""
    col = blocks[:, :, p]
    u = col.conj() if conj[0] else col
    Y = np.tensordot(u, S, axes=([1], [0]))
    for m in range(1, S.ndim):
        u = col.conj() if conj[m] else col
        Y = np.einsum("ba,ba...->b...", u, Y)
    return Y


def _diag_index(n: int, order: int):
    idx = np.arange(n)
    return (idx,) * order


class CostState:
    """Transformed tensors of a cost at a current point ``X``.

    The state is mutable and meant to be owned by one solver run.
    """

    def __init__(self, spec: CostSpec, X=None):
        self.spec = spec
        self.terms = spec.expanded_terms()
        n = spec.dim
        X = np.eye(n) if X is None else _check_point(spec, X)
        dtype = float if spec.group == "orthogonal" else complex
        self.X = np.array(X, dtype=dtype)
        self.refresh()

    @property
    def n(self) -> int:
        return self.spec.dim

    def refresh(self) -> None:
        """Recompute every transformed tensor from the original data and ``X``."""
        dtype = self.X.dtype
        self.W = [
            np.array(multi_transform(t.tensor, self.X, [m for m, c in enumerate(t.conj) if c]), dtype=dtype)
            for t in self.terms
        ]

    def set_point(self, X) -> None:
        self.X = np.array(X, dtype=self.X.dtype)
        self.refresh()

    def value(self) -> float:
        total = 0.0
        for t, W in zip(self.terms, self.W):
            diag = W[_diag_index(self.n, W.ndim)]
            if t.kind == "trace":
                total += float(diag.sum().real)
            else:
                total += t.weight * float(np.sum(diag.real**2 + diag.imag**2))
        return total

    def trace_imag(self) -> float:
        return sum(
            abs(float(W[_diag_index(self.n, W.ndim)].sum().imag))
            for t, W in zip(self.terms, self.W)
            if t.kind == "trace"
        )

    def block_values(self, i: int, j: int, blocks) -> np.ndarray:
        """``f(X G(i, j, block))`` for a batch of 2x2 blocks, shape ``(B, 2, 2)``."""
        blocks = np.asarray(blocks)
        if blocks.ndim == 2:
            blocks = blocks[None]
        n = self.n
        if not 0 <= i < j < n:
            raise ValueError(f"pair ({i}, {j}) out of range for n={n}")
        others = np.setdiff1d(np.arange(n), [i, j])
        total = np.zeros(blocks.shape[0])
        for t, W in zip(self.terms, self.W):
            d = W.ndim
            S = W[np.ix_(*([[i, j]] * d))]
            rest = W[(others,) * d]
            y0 = _diag_entries(S, t.conj, blocks, 0)
            y1 = _diag_entries(S, t.conj, blocks, 1)
            if t.kind == "trace":
                total += float(rest.sum().real) + (y0 + y1).real
            else:
                const = float(np.sum(rest.real**2 + rest.imag**2))
                moving = y0.real**2 + y0.imag**2 + y1.real**2 + y1.imag**2
                total += t.weight * (const + moving)
        return total

    def moving_values(self, i: int, j: int, blocks) -> np.ndarray:
        """Like :meth:`block_values` without the part that does not depend on the block."""
        blocks = np.asarray(blocks)
        total = np.zeros(blocks.shape[0])
        for t, W in zip(self.terms, self.W):
            S = W[np.ix_(*([[i, j]] * W.ndim))]
            y0 = _diag_entries(S, t.conj, blocks, 0)
            y1 = _diag_entries(S, t.conj, blocks, 1)
            if t.kind == "trace":
                total += (y0 + y1).real
            else:
                total += t.weight * (y0.real**2 + y0.imag**2 + y1.real**2 + y1.imag**2)
        return total

    def apply_block(self, i: int, j: int, block) -> None:
        """Move to ``X G(i, j, block)``, updating only the affected slices."""
        block = np.asarray(block, dtype=self.X.dtype)
        self.X[:, [i, j]] = self.X[:, [i, j]] @ block
        for t, W in zip(self.terms, self.W):
            apply_block_inplace(W, i, j, block, t.conj)

    def pulled_gradient(self) -> np.ndarray:
        """``Lambda = X^H grad f(X)`` assembled from the cached tensors.

        Only entries of the form ``W[p, .., q, .., p]`` enter, so this costs
        ``O(d n^2)`` per term.
        """
        n = self.n
        ar = np.arange(n)
        Lam = np.zeros((n, n), dtype=self.X.dtype)
        for t, W in zip(self.terms, self.W):
            d = W.ndim
            diag = W[(ar,) * d]
            for m in range(d):
                idx = [ar[None, :]] * d
                idx[m] = ar[:, None]
                T = W[tuple(idx)]  # T[q, p] = W[p, .., q (mode m), .., p]
                if t.kind == "trace":
                    Lam = Lam + (T if t.conj[m] else T.conj())
                elif t.conj[m]:
                    Lam = Lam + 2.0 * t.weight * diag.conj()[None, :] * T
                else:
                    Lam = Lam + 2.0 * t.weight * diag[None, :] * T.conj()
        return Lam


# ---------------------------------------------------------------------------
# public evaluation API
# ---------------------------------------------------------------------------


def transformed_tensors(spec: CostSpec, X) -> list[DenseTensor]:
    """The ``W_l`` (or ``V``) whose diagonals define ``f(X)``."""
    state = CostState(spec, X)
    return [DenseTensor(W) for W in state.W]


def evaluate(spec: CostSpec, X) -> float:
    """Cost value at ``X``.

    For a trace form, a trace whose imaginary part exceeds ``1e-10`` times the
    Frobenius norm of ``B`` raises ``ValueError`` (``B`` is not Hermitian).
    """
    state = CostState(spec, X)
    if isinstance(spec, TraceForm):
        scale = max(frob_norm(spec.B), 1.0)
        if state.trace_imag() > TRACE_IMAG_RTOL * scale:
            raise ValueError("trace has a non-negligible imaginary part; B is not Hermitian")
    return state.value()


def restricted_samples_real(spec: CostSpec, Q, i: int, j: int, N: int | None = None) -> np.ndarray:
    """``h(theta) = f(Q G(i, j, theta))`` at ``theta_m = 2 pi m / N``."""
    if not isinstance(spec, RealSymmetric):
        raise TypeError("restricted_samples_real needs a RealSymmetric cost")
    d = spec.order
    N = 4 * d + 1 if N is None else N
    if N < 4 * d + 1:
        raise ValueError(f"need N >= {4 * d + 1} samples for a degree-{2 * d} trig polynomial")
    state = CostState(spec, Q)
    theta = 2 * np.pi * np.arange(N) / N
    return state.block_values(i, j, givens_block(theta))


def restricted_value_complex(spec: CostSpec, U, i: int, j: int, psi) -> float:
    """``f(U G(i, j, Psi))``; ``psi`` is a PlaneTransform or a ``(c, s1, s2)`` triple."""
    c, s1, s2 = psi.params if hasattr(psi, "params") else psi
    if abs(c * c + s1 * s1 + s2 * s2 - 1.0) > 1e-12:
        raise ValueError("(c, s1, s2) is off the unit sphere")
    state = CostState(spec, U)
    if (c, s1, s2) == (1.0, 0.0, 0.0):
        return state.value()
    return float(state.block_values(i, j, psi_block(c, s1, s2))[0])


def build_hermitian_form(spec: ComplexGeneral | RealSymmetric, max_dim: int = 4, max_order: int = 3) -> TraceForm:
    """Hermitian order-``2d`` tensor ``B`` with ``tr``-form equal to ``spec``.

    Each term contributes ``alpha * A[a] * conj(A[b])`` at the index pair
    obtained by routing conjugated positions of ``a`` and plain positions of
    ``b`` into the first half. Terms of order below ``d`` are padded with
    ``delta(k, l)`` pairs, which contribute ``sum_q |U[q, p]|^2 = 1``.
    """
    if isinstance(spec, RealSymmetric):
        spec = ComplexGeneral(tuple((T.data.astype(complex), 0, 1.0) for T in spec.tensors))
    n, d = spec.dim, spec.order
    if n > max_dim or d > max_order:
        raise ValueError(f"build_hermitian_form limited to n <= {max_dim}, d <= {max_order}")
    B = np.zeros((n,) * (2 * d), dtype=complex)
    for A, t, alpha in spec.terms:
        dl = A.order
        outer = alpha * np.multiply.outer(A.data, A.data.conj())  # axes a_0.., b_0..
        k_axes = [m if m < t else dl + m for m in range(dl)]
        l_axes = [dl + m if m < t else m for m in range(dl)]
        T = outer.transpose(k_axes + l_axes)
        for _ in range(d - dl):
            T = np.multiply.outer(T, np.eye(n))
        # axes now: k_0..k_{dl-1}, l_0..l_{dl-1}, (k_e, l_e) pairs
        extra = d - dl
        pad_k = [2 * dl + 2 * e for e in range(extra)]
        pad_l = [2 * dl + 2 * e + 1 for e in range(extra)]
        order = list(range(dl)) + pad_k + list(range(dl, 2 * dl)) + pad_l
        B += T.transpose(order)
    swap = tuple(range(d, 2 * d)) + tuple(range(d))
    B = (B + B.transpose(swap).conj()) / 2.0
    return TraceForm(DenseTensor(B))


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def save_manifest(spec: CostSpec, directory: str | os.PathLike, name: str = "cost") -> Path:
    """Write the tensors as ``.ten`` files plus a JSON manifest; returns its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(spec, RealSymmetric):
        files = []
        for k, T in enumerate(spec.tensors):
            fname = f"{name}_A{k + 1}.ten"
            write_ten(T, directory / fname)
            files.append(fname)
        doc = {"variant": "real-symmetric", "tensors": files}
    elif isinstance(spec, ComplexGeneral):
        terms = []
        for k, (A, t, alpha) in enumerate(spec.terms):
            fname = f"{name}_A{k + 1}.ten"
            write_ten(A, directory / fname)
            terms.append({"tensor": fname, "t": t, "alpha": alpha})
        doc = {"variant": "complex-general", "terms": terms}
    elif isinstance(spec, TraceForm):
        fname = f"{name}_B.ten"
        write_ten(spec.B, directory / fname)
        doc = {"variant": "trace-form", "tensor": fname}
    else:
        raise TypeError(f"unsupported cost {type(spec).__name__}")
    path = directory / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_manifest(path: str | os.PathLike) -> CostSpec:
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    variant = doc.get("variant")
    if variant == "real-symmetric":
        return RealSymmetric(tuple(read_ten(base / f) for f in doc["tensors"]))
    if variant == "complex-general":
        return ComplexGeneral(tuple(
            (read_ten(base / t["tensor"]), int(t["t"]), float(t["alpha"])) for t in doc["terms"]
        ))
    if variant == "trace-form":
        return TraceForm(read_ten(base / doc["tensor"]))
    raise ValueError(f"{path}: unknown cost variant {variant!r}")
