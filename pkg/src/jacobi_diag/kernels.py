"""Small self-contained numerical primitives.

Trigonometric interpolation and critical points, an Aberth polynomial root
finder, a 3x3 symmetric eigensolver, re-orthonormalization onto O(n)/U(n)
and a central finite-difference oracle on those groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = [
    "ConvergenceError",
    "TrigPoly",
    "dft_fit",
    "trig_critical_points",
    "poly_roots",
    "sym3_eig",
    "reorthonormalize",
    "group_drift",
    "fd_directional",
]

EPS = np.finfo(float).eps


class ConvergenceError(RuntimeError):
    """An iterative kernel hit its iteration cap without meeting its residual test."""


# ---------------------------------------------------------------------------
# trigonometric polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """``a0 + sum_k a[k-1] cos(k t) + b[k-1] sin(k t)`` for ``k = 1..degree``."""

    a0: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("cosine and sine coefficient arrays must match")
        if not (np.isfinite(self.a0) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def degree(self) -> int:
        return self.a.size

    @cached_property
    def scale(self) -> float:
        return abs(self.a0) + float(np.sum(np.abs(self.a)) + np.sum(np.abs(self.b)))

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = np.arange(1, self.degree + 1)
        kt = np.multiply.outer(theta, k)
        return self.a0 + np.cos(kt) @ self.a + np.sin(kt) @ self.b

    def derivative(self, order: int = 1) -> "TrigPoly":
        a, b = self.a, self.b
        k = np.arange(1, self.degree + 1, dtype=float)
        for _ in range(order):
            a, b = k * b, -k * a
        return TrigPoly(0.0, a, b)


def dft_fit(samples, degree: int, rtol: float = 1e-9) -> TrigPoly:
    """Interpolate samples taken at ``t_m = 2 pi m / N`` by a trig polynomial.

    Frequencies above ``degree`` that the grid can resolve must be negligible
    (``<= rtol`` times the coefficient scale); otherwise the degree bound is
    wrong for the sampled function and ``ValueError`` is raised.
    """
    x = np.asarray(samples, dtype=float)
    N = x.size
    if N < 2 * degree + 1:
        raise ValueError(f"need at least {2 * degree + 1} samples for degree {degree}, got {N}")
    c = np.fft.rfft(x) / N
    a0 = float(c[0].real)
    k = np.arange(1, degree + 1)
    a = 2.0 * c[k].real
    b = -2.0 * c[k].imag
    poly = TrigPoly(a0, a, b)
    tail = np.abs(c[degree + 1:])
    if tail.size and tail.max() > rtol * max(poly.scale, np.abs(x).max(), 1e-300):
        raise ValueError("samples contain frequencies above the stated degree (aliasing)")
    return poly


def _trimmed_degree(p: TrigPoly, rtol: float = 1e-13) -> int:
    mags = np.hypot(p.a, p.b)
    cut = rtol * max(p.scale, 1e-300)
    nz = np.nonzero(mags > cut)[0]
    return int(nz[-1]) + 1 if nz.size else 0


def trig_critical_points(p: TrigPoly, newton_steps: int = 1) -> np.ndarray:
    """All real critical points of ``p`` in ``(-pi, pi]``.

    ``p'(t)`` is rewritten with ``z = exp(i t)`` as ``z^{-m} P(z)`` where ``P``
    has degree ``2m``; roots of ``P`` close to the unit circle give the
    critical angles, which are then polished by Newton steps on ``p'``.
    A constant polynomial has no critical points to report.
    """
    dp = p.derivative()
    m = _trimmed_degree(dp)
    if m == 0:
        return np.zeros(0)
    mags = np.hypot(dp.a[:m], dp.b[:m])
    freqs = np.nonzero(mags > 1e-13 * dp.scale)[0] + 1
    q = int(np.gcd.reduce(freqs))
    # p'(t) = r(q t) with r of degree m / q
    a, b = dp.a[q - 1:m:q], dp.b[q - 1:m:q]
    pos = (a - 1j * b) / 2.0  # coefficient of z^k
    neg = (a + 1j * b) / 2.0  # coefficient of z^-k
    # ascending powers z^0 .. z^2m of z^m r(z)
    coeffs = np.concatenate([neg[::-1], [0.0], pos])
    roots = poly_roots(coeffs[::-1])
    mod = np.abs(roots)
    # double roots of p' sit on the circle only to ~sqrt(eps)
    near = np.abs(np.log(np.maximum(mod, 1e-300))) < 1e-3
    phi = np.angle(roots[near])
    theta = ((phi[:, None] + 2 * np.pi * np.arange(q)[None, :]) / q).ravel()
    d2p = dp.derivative()
    for _ in range(newton_steps):
        slope = d2p(theta)
        ok = np.abs(slope) > 1e-12 * max(dp.scale, 1e-300)
        step = np.zeros_like(theta)
        step[ok] = dp(theta[ok]) / slope[ok]
        step = np.clip(step, -1e-2, 1e-2)
        theta = theta - step
    theta = _wrap(theta)
    keep = np.abs(dp(theta)) <= 1e-6 * max(dp.scale, 1e-300)
    theta = np.sort(theta[keep])
    if theta.size > 1:
        distinct = np.concatenate([[True], np.diff(theta) > 1e-12])
        theta = theta[distinct]
    return theta


def _wrap(theta):
    """Map angles into (-pi, pi]."""
    out = np.mod(np.asarray(theta) + np.pi, 2 * np.pi) - np.pi
    return np.where(out <= -np.pi, out + 2 * np.pi, out)


# ---------------------------------------------------------------------------
# polynomial roots
# ---------------------------------------------------------------------------


def poly_roots(coeffs, max_iter: int = 200) -> np.ndarray:
    """All complex roots of ``coeffs[0] z^n + ... + coeffs[n]`` by Aberth iteration.

    Starting points are spread on a circle whose radius is the Cauchy bound
    ``1 + max |a_i / a_n|``. Raises ``ConvergenceError`` if the cap is hit
    and some root has residual above ``1e-10 * ||coeffs||``.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    c = c[nz[0]:]
    # exact zeros at the origin
    nzero = c.size - 1 - np.nonzero(c)[0][-1]
    c = c[: c.size - nzero]
    deg = c.size - 1
    if deg == 0:
        return np.zeros(nzero, dtype=complex)
    c = c / c[0]
    dc = c[:-1] * np.arange(deg, 0, -1)
    absc = np.abs(c)

    radius = 1.0 + float(np.max(absc[1:]))
    # the offset avoids symmetric starts that stall on real-coefficient polynomials
    z = radius * np.exp(1j * (2 * np.pi * np.arange(deg) / deg + 0.4))
    done = np.zeros(deg, dtype=bool)
    diag = np.arange(deg)
    old = np.seterr(divide="ignore", invalid="ignore")
    try:
        for _ in range(max_iter):
            V = np.vander(z, deg + 1)
            pz = V @ c
            absp = np.abs(pz)
            done |= (absp <= 4 * EPS * (np.abs(V) @ absc)) | (absp <= EPS**2)
            if done.all():
                break
            newton = pz / (V[:, 1:] @ dc)
            diff = z[:, None] - z
            diff[diag, diag] = 1.0
            repulsion = (1.0 / diff).sum(axis=1) - 1.0
            w = newton / (1.0 - newton * repulsion)
            w[done | ~np.isfinite(w)] = 0.0
            z = z - w
            done |= np.abs(w) <= 2 * EPS * np.abs(z)
        else:
            resid = np.abs(np.polyval(c, z)) / np.linalg.norm(c)
            if resid.max() > 1e-10:
                raise ConvergenceError(f"Aberth iteration did not converge (residual {resid.max():.2e})")
    finally:
        np.seterr(**old)
    return np.concatenate([z, np.zeros(nzero, dtype=complex)])


# ---------------------------------------------------------------------------
# 3x3 symmetric eigenproblem
# ---------------------------------------------------------------------------


def _sign_fix(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _jacobi3(G: np.ndarray, sweeps: int = 30) -> tuple[np.ndarray, np.ndarray]:
    A = G.copy()
    V = np.eye(3)
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(sweeps):
        off = abs(A[0, 1]) + abs(A[0, 2]) + abs(A[1, 2])
        if off <= EPS * scale * 1e-2:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if A[p, q] == 0.0:
                continue
            tau = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
            # for huge tau, t ~ 1 / (2 tau) avoids squaring it
            t = 0.5 / tau if abs(tau) > 1e150 else math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            J = np.eye(3)
            J[p, p] = J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
            V = V @ J
    return np.diag(A).copy(), V


def sym3_eig(G) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric 3x3 matrix.

    Eigenvalues come from the trigonometric solution of the characteristic
    cubic and eigenvectors from cross products of rows of ``G - lam I``. When
    the eigenvalues are nearly degenerate, or the closed form fails its
    residual/orthogonality check, a cyclic Jacobi iteration is used instead.

    Returns
    -------
    lam : ndarray, shape (3,)
        Eigenvalues in descending order.
    V : ndarray, shape (3, 3)
        Orthonormal eigenvectors as columns; each column's largest-magnitude
        component is positive.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    norm = max(np.linalg.norm(G), 1e-300)
    if np.max(np.abs(G - G.T)) > 1e-12 * norm:
        raise ValueError("matrix is not symmetric")
    G = (G + G.T) / 2.0

    q = np.trace(G) / 3.0
    B = G - q * np.eye(3)
    p2 = np.sum(B * B) / 6.0
    p = math.sqrt(p2)
    lam = V = None
    if p > 1e-12 * norm:
        det = np.linalg.det(B / p)
        phi = math.acos(min(1.0, max(-1.0, det / 2.0))) / 3.0
        lam = q + 2.0 * p * np.cos(phi + 2.0 * np.pi * np.arange(3) / 3.0)
        lam = np.sort(lam)[::-1]
        # discriminant proxy: smallest relative gap
        gap = min(lam[0] - lam[1], lam[1] - lam[2]) / norm
        if gap > 1e-6:
            cols = []
            for value in lam:
                R = G - value * np.eye(3)
                cands = [np.cross(R[0], R[1]), np.cross(R[0], R[2]), np.cross(R[1], R[2])]
                v = max(cands, key=np.linalg.norm)
                cols.append(v / np.linalg.norm(v))
            V = np.column_stack(cols)
            resid = np.linalg.norm(G @ V - V * lam, axis=0).max()
            if resid > 1e-12 * norm or np.abs(V.T @ V - np.eye(3)).max() > 1e-12:
                V = None
    if V is None:
        lam, V = _jacobi3(G)
        order = np.argsort(-lam, kind="stable")
        lam, V = lam[order], V[:, order]
    return lam, _sign_fix(V)


# ---------------------------------------------------------------------------
# group utilities
# ---------------------------------------------------------------------------


def group_drift(X) -> float:
    """``max |X^H X - I|``, the distance of ``X`` from the orthogonal/unitary group."""
    X = np.asarray(X)
    return float(np.max(np.abs(X.conj().T @ X - np.eye(X.shape[1]))))


def reorthonormalize(X, group: str = "orthogonal", max_drift: float = 1e-2) -> np.ndarray:
    """Project a nearly orthonormal matrix back onto its group.

    Uses the Gram-Schmidt (QR) factor with the triangular factor's diagonal
    made real positive, so the result is deterministic and equals ``X`` when
    ``X`` already lies on the group.
    """
    X = np.asarray(X)
    if group not in ("orthogonal", "unitary"):
        raise ValueError(f"unknown group {group!r}")
    if group == "orthogonal" and np.iscomplexobj(X):
        if np.abs(X.imag).max() > 0:
            raise ValueError("complex matrix cannot be projected onto O(n)")
        X = X.real
    drift = group_drift(X)
    if not drift <= max_drift:
        raise ValueError(f"matrix is too far from the {group} group (drift {drift:.2e})")
    Q, R = np.linalg.qr(X)
    d = np.diag(R)
    phase = d / np.abs(d)
    Q = Q * phase
    if drift <= EPS:
        return X.copy()
    return Q


def fd_directional(fun: Callable[[np.ndarray], float], X, direction, step: float = 1e-5,
                   group: str | None = None) -> float:
    """Central difference of ``fun`` along ``direction`` with re-orthonormalization.

    The error is O(step**2) plus rounding of order ``eps * |fun| / step``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    X = np.asarray(X)
    D = np.asarray(direction)
    if group is None:
        group = "unitary" if np.iscomplexobj(X) or np.iscomplexobj(D) else "orthogonal"
    plus = reorthonormalize(X + step * D, group)
    minus = reorthonormalize(X - step * D, group)
    return (fun(plus) - fun(minus)) / (2.0 * step)
