"""Riemannian gradients on O(n) / U(n) and the gradient-based pair rules.

The tangent space at ``X`` is ``X * skew``; the Riemannian gradient is
represented by its generator ``P = (Lambda - Lambda^H) / 2`` with
``Lambda = X^H grad f(X)`` (Euclidean gradient for the real inner product
``Re tr(A^H B)``). The pair derivative ``g_ij = 2 P[i, j]`` is the
derivative of ``f`` along ``X (E_ij - E_ji)``; with the Givens block
``[[c, -s], [s, c]]`` this is ``-h'(0)``.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .cost import CostState, RealSymmetric
from .kernels import fd_directional

__all__ = [
    "PairDerivatives",
    "pair_derivatives_real",
    "riemann_gradient_complex",
    "pair_derivatives",
    "euclidean_gradient",
    "riemannian_generator",
    "jacobi_g_pair",
    "delta_bound",
]

PHASE_RTOL = 1e-10


@dataclass(frozen=True)
class PairDerivatives:
    """Pairwise first-order information at one point.

    ``g[i, j]`` (``i < j``, zero elsewhere) is the derivative along the
    generator ``E_ij - E_ji`` on O(n), i.e. ``-h'_{(i, j)}(0)`` for
    ``G(i, j, theta)``; only its magnitude enters pair selection.
    On U(n), ``local_norms[i, j]`` is the norm of the restricted gradient at
    the identity, ``sqrt(2) |P[i, j]|``; ``g`` then holds the same values.
    """

    g: np.ndarray
    grad_norm: float
    group: Literal["orthogonal", "unitary"] = "orthogonal"
    local_norms: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def selection_scores(self) -> np.ndarray:
        """``|h'(0)|`` (real) or local gradient norms (complex), upper triangle."""
        return np.abs(self.g) if self.local_norms is None else self.local_norms


def _real_from_W(Wlist) -> PairDerivatives:
    n = Wlist[0].shape[0]
    ar = np.arange(n)
    Lam = np.zeros((n, n))
    for W in Wlist:
        d = W.ndim
        diag = W[(ar,) * d]
        T = W[(ar[:, None],) + (ar[None, :],) * (d - 1)]  # T[q, p] = W[q, p, .., p]
        Lam += 2.0 * d * diag[None, :] * T
    g = np.triu(Lam - Lam.T, 1)
    return PairDerivatives(g, math.sqrt(float(np.sum(g * g)) / 2.0), "orthogonal")


def pair_derivatives_real(spec: RealSymmetric, Wlist) -> PairDerivatives:
    """Pair derivatives from the current transformed tensors.

    ``g_ij = sum_l 2d (W_l[i, j..j] W_l[j..j] - W_l[j, i..i] W_l[i..i])``;
    the gradient norm follows from ``||P||^2 = sum_{i<j} g_ij^2 / 2``.
    """
    if not isinstance(spec, RealSymmetric):
        raise TypeError("pair_derivatives_real needs a RealSymmetric cost")
    return _real_from_W([np.asarray(W.data if hasattr(W, "data") else W) for W in Wlist])


def _complex_from_state(state: CostState) -> PairDerivatives:
    P = riemannian_generator(state.pulled_gradient())
    scale = 1.0 + float(np.abs(P).max()) + abs(state.value())
    phase = float(np.abs(np.diag(P)).max())
    if phase > PHASE_RTOL * scale:
        raise ValueError(f"gradient has a phase component ({phase:.2e}); cost outside the supported family")
    local = np.triu(math.sqrt(2.0) * np.abs(P), 1)
    g = local.copy()
    return PairDerivatives(g, float(np.linalg.norm(P)), "unitary", local)


def riemann_gradient_complex(spec, U, method: Literal["contract", "fd"] = "contract") -> PairDerivatives:
    """Projected gradient on U(n) and the per-pair restricted gradient norms.

    ``method="fd"`` builds the generator from central differences along a
    basis of skew-Hermitian directions instead of the analytic contraction;
    it is slow and meant for cross-checking.
    """
    if spec.group != "unitary":
        raise TypeError("riemann_gradient_complex needs a cost on the unitary group")
    if method == "fd":
        P = _fd_generator(spec, U)
        local = np.triu(math.sqrt(2.0) * np.abs(P), 1)
        return PairDerivatives(local.copy(), float(np.linalg.norm(P)), "unitary", local)
    return _complex_from_state(CostState(spec, U))


def pair_derivatives(state: CostState) -> PairDerivatives:
    """Dispatch on the group of the cost held by ``state``."""
    if state.spec.group == "orthogonal":
        return _real_from_W(state.W)
    return _complex_from_state(state)


def riemannian_generator(Lam: np.ndarray) -> np.ndarray:
    return (Lam - Lam.conj().T) / 2.0


def euclidean_gradient(spec, X) -> np.ndarray:
    """Euclidean gradient of ``f`` at ``X`` assembled from the original tensors.

    Independent of :class:`CostState`: every mode derivative is an explicit
    contraction of the untransformed tensor with the columns of ``X``.
    """
    X = np.asarray(X)
    n = spec.dim
    grad = np.zeros((n, n), dtype=complex if np.iscomplexobj(X) or spec.group == "unitary" else float)
    for term in spec.expanded_terms():
        A = term.tensor
        d = A.ndim
        letters = string.ascii_lowercase[:d]
        factors = [X.conj() if term.conj[m] else X for m in range(d)]
        diag = None
        for m in range(d):
            others = [k for k in range(d) if k != m]
            expr = letters + "".join(f",{letters[k]}z" for k in others) + f"->{letters[m]}z"
            T = np.einsum(expr, A, *[factors[k] for k in others])  # T[q, p]
            if diag is None:
                diag = np.sum(factors[m] * T, axis=0)
            if term.kind == "trace":
                grad = grad + (T if term.conj[m] else T.conj())
            elif term.conj[m]:
                grad = grad + 2.0 * term.weight * diag.conj()[None, :] * T
            else:
                grad = grad + 2.0 * term.weight * diag[None, :] * T.conj()
    if spec.group == "orthogonal":
        grad = grad.real
    return grad


def _fd_generator(spec, U, step: float = 1e-5) -> np.ndarray:
    from .cost import evaluate

    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    P = np.zeros((n, n), dtype=complex)
    fun = lambda X: evaluate(spec, X)  # noqa: E731
    for i in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[i, i] = 1j
        P[i, i] = 1j * fd_directional(fun, U, U @ E, step, "unitary")
        for j in range(i + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[i, j], E[j, i] = 1.0, -1.0
            re = fd_directional(fun, U, U @ E, step, "unitary") / 2.0
            E = np.zeros((n, n), dtype=complex)
            E[i, j], E[j, i] = 1j, 1j
            im = fd_directional(fun, U, U @ E, step, "unitary") / 2.0
            P[i, j] = re + 1j * im
            P[j, i] = -np.conj(P[i, j])
    return P


def delta_bound(n: int, group: str) -> float:
    """Upper bound on delta for which a valid pair always exists."""
    return 2.0 / n if group == "orthogonal" else math.sqrt(2.0) / n


def _cyclic_order(n: int):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def jacobi_g_pair(pd: PairDerivatives, delta: float,
                  strategy: Literal["max", "first-cyclic"] = "max", start: int = 0) -> tuple[int, int]:
    """Pick a pair whose score is at least ``delta * grad_norm``.

    ``"max"`` takes the largest score, which always qualifies for ``delta``
    below :func:`delta_bound`. ``"first-cyclic"`` walks the row-major pair
    order starting at position ``start`` and returns the first qualifying pair.
    """
    n = pd.n
    if not 0 < delta < delta_bound(n, pd.group):
        raise ValueError(f"delta must lie in (0, {delta_bound(n, pd.group):.4g}) for n={n}")
    if pd.grad_norm == 0:
        raise ValueError("gradient is zero; the point is stationary")
    scores = pd.selection_scores()
    threshold = delta * pd.grad_norm
    if strategy == "max":
        iu = np.triu_indices(n, 1)
        k = int(np.argmax(scores[iu]))
        i, j = int(iu[0][k]), int(iu[1][k])
    elif strategy == "first-cyclic":
        order = _cyclic_order(n)
        for step in range(len(order)):
            i, j = order[(start + step) % len(order)]
            if scores[i, j] >= threshold:
                break
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if scores[i, j] < threshold:
        raise RuntimeError("no pair satisfies the selection inequality")
    return i, j
