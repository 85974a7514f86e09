"""Exact solvers for the one-plane subproblems.

On O(n) the restricted cost ``h(theta) = f(Q G(i, j, theta))`` is a
trigonometric polynomial of degree at most ``2d``; it is interpolated from
``4d + 1`` samples and maximized over its critical points.

On U(n), for costs of order ``d <= 3``, the restricted cost is a quadratic
form ``h = r^T Gamma r`` in ``r = (2c^2 - 1, -2 c s1, -2 c s2)``. ``Gamma`` is
fitted from six evaluations, certified on fresh points, and maximized through
its dominant eigenvector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import CostState, RealSymmetric
from .kernels import TrigPoly, dft_fit, sym3_eig, trig_critical_points
from .rotations import PlaneTransform, givens_block, params_from_r, psi_block, r_vector

__all__ = [
    "CertificationError",
    "GammaMatrix",
    "GAMMA_FIT_POINTS",
    "solve_angle_real",
    "build_gamma",
    "solve_plane_complex",
    "AngleSolution",
]

TIE_RTOL = 1e-9
NOOP_RTOL = 1e-14
CERT_RTOL = 1e-9


class CertificationError(RuntimeError):
    """The restricted cost is not the quadratic form it is assumed to be."""


def _gamma_fit_points() -> np.ndarray:
    # r = e1, e2, e3, (e1+e2)/sqrt2, (e1+e3)/sqrt2, (e2+e3)/sqrt2
    s = 1 / math.sqrt(2)
    rs = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (s, s, 0), (s, 0, s), (0, s, s)]
    return np.array([params_from_r(r) for r in rs])


#: (c, s1, s2) triples used to fit Gamma; their r-vectors give a well-posed system
GAMMA_FIT_POINTS = _gamma_fit_points()

_CERT_POINTS = (lambda v: v / np.linalg.norm(v, axis=1, keepdims=True))(
    np.random.default_rng(20200614).standard_normal((20, 3))
)
_CERT_POINTS[:, 0] = np.abs(_CERT_POINTS[:, 0])


def _quad_design(R: np.ndarray) -> np.ndarray:
    # unknowns: G11, G22, G33, G12, G13, G23
    x, y, z = R[:, 0], R[:, 1], R[:, 2]
    return np.column_stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z])


def _unpack(g: np.ndarray) -> np.ndarray:
    return np.array([[g[0], g[3], g[4]], [g[3], g[1], g[5]], [g[4], g[5], g[2]]])


@dataclass(frozen=True)
class AngleSolution:
    theta: float
    h_max: float
    h0: float
    poly: TrigPoly

    def __iter__(self):
        return iter((self.theta, self.h_max, self.poly))


def _solve_angle_state(state: CostState, i: int, j: int) -> AngleSolution:
    d = max(W.ndim for W in state.W)
    N = 4 * d + 1
    theta = 2 * np.pi * np.arange(N) / N
    # one off-grid probe guards the degree bound
    probe = 0.5 + 0.1 * math.sqrt(2)
    moving = state.moving_values(i, j, givens_block(np.append(theta, probe)))
    poly = dft_fit(moving[:N], 2 * d)
    scale = max(poly.scale, 1e-300)
    if abs(poly(probe) - moving[N]) > 1e-9 * scale:
        raise ValueError("restricted cost is not a trigonometric polynomial of the expected degree")
    base = state.value() - moving[0]

    h0 = float(poly(0.0))
    crit = trig_critical_points(poly)
    if crit.size == 0:
        return AngleSolution(0.0, base + h0, base + h0, poly)
    vals = poly(crit)
    top = vals.max()
    cands = crit[vals >= top - TIE_RTOL * scale]
    mags = np.abs(cands)
    close = cands[mags <= mags.min() + 1e-12]
    best = float(close.max())  # +theta wins an exact magnitude tie
    h_best = float(poly(best))
    gain = h_best - h0
    # near a stationary point the gain of the small maximizing step is below
    # rounding and may even evaluate slightly negative; far moves need a real gain
    if gain < -NOOP_RTOL * scale or (gain <= NOOP_RTOL * scale and abs(best) > 1e-3):
        best, h_best = 0.0, h0
    return AngleSolution(best, base + h_best, base + h0, poly)


def solve_angle_real(spec: RealSymmetric, Q, i: int, j: int) -> AngleSolution:
    """Globally maximize ``theta -> f(Q G(i, j, theta))``.

    Among maximizers within ``1e-9`` (relative) of the best value the angle of
    smallest magnitude is returned, ``+theta`` before ``-theta``. A move whose
    gain is at rounding level is replaced by ``theta = 0``.

    Returns
    -------
    AngleSolution
        Unpacks as ``(theta, h_max, poly)``; ``poly`` interpolates the
        ``theta``-dependent part of the cost.
    """
    if not isinstance(spec, RealSymmetric):
        raise TypeError("solve_angle_real needs a RealSymmetric cost")
    return _solve_angle_state(CostState(spec, Q), i, j)


@dataclass(frozen=True)
class GammaMatrix:
    """Real symmetric 3x3 matrix with ``h(c, s1, s2) = r^T G r`` in the pair ``(i, j)``."""

    entries: np.ndarray
    i: int = 0
    j: int = 1
    certified_error: float = 0.0

    def __post_init__(self):
        G = np.asarray(self.entries, dtype=float)
        if G.shape != (3, 3) or np.abs(G - G.T).max() > 1e-12 * max(1.0, np.abs(G).max()):
            raise ValueError("Gamma must be a symmetric 3x3 matrix")
        object.__setattr__(self, "entries", (G + G.T) / 2)

    def value(self, c, s1, s2):
        r = r_vector(c, s1, s2)
        return np.einsum("...a,ab,...b->...", r, self.entries, r)

    def hessian_surrogate(self) -> np.ndarray:
        G = self.entries
        return 2.0 * (G[1:, 1:] - G[0, 0] * np.eye(2))


def _gamma_state(state: CostState, i: int, j: int, certify: bool = True) -> GammaMatrix:
    pts = np.vstack([GAMMA_FIT_POINTS, _CERT_POINTS]) if certify else GAMMA_FIT_POINTS
    blocks = psi_block(pts[:, 0], pts[:, 1], pts[:, 2])
    h = state.moving_values(i, j, blocks)
    base = state.value() - state.moving_values(i, j, np.eye(2, dtype=complex)[None])[0]
    h = h + base
    R = r_vector(pts[:, 0], pts[:, 1], pts[:, 2])
    g = np.linalg.solve(_quad_design(R[:6]), h[:6])
    G = _unpack(g)
    err = 0.0
    if certify:
        fit = np.einsum("ka,ab,kb->k", R[6:], G, R[6:])
        err = float(np.max(np.abs(fit - h[6:]) / (1.0 + np.abs(h[6:]))))
        if err > CERT_RTOL:
            raise CertificationError(
                f"restricted cost is not a quadratic form in r (pair ({i}, {j}), error {err:.2e})"
            )
    return GammaMatrix(G, i, j, err)


def build_gamma(spec, U, i: int, j: int) -> GammaMatrix:
    """Fit and certify ``Gamma`` for the pair ``(i, j)`` at ``U``.

    The fit uses :data:`GAMMA_FIT_POINTS`; certification compares the
    quadratic form with direct evaluation at 20 fixed pseudo-random sphere
    points and raises :class:`CertificationError` beyond ``1e-9 (1 + |h|)``.
    """
    if spec.group != "unitary":
        raise TypeError("build_gamma needs a cost on the unitary group")
    if spec.order > 3:
        raise ValueError("the quadratic-form representation needs order d <= 3")
    return _gamma_state(CostState(spec, U), i, j)


def solve_plane_complex(G: GammaMatrix) -> tuple[PlaneTransform, float]:
    """Maximize ``r^T Gamma r`` over the unit sphere.

    The maximizer is the dominant eigenvector, oriented towards the identity
    (largest ``r_1``). On an eigenvalue tie the vector in the top eigenspace
    closest to ``e1`` is used; failing that, ``s2 = 0`` and ``s1 >= 0`` are
    preferred.
    """
    lam, V = sym3_eig(G.entries)
    scale = max(1.0, float(np.abs(lam).max()))
    top = V[:, lam >= lam[0] - 1e-10 * scale]
    r = None
    for axis, sign in ((0, 1.0), (1, -1.0), (2, -1.0)):
        e = np.zeros(3)
        e[axis] = sign
        proj = top @ (top.T @ e)
        if np.linalg.norm(proj) > 1e-8:
            r = proj / np.linalg.norm(proj)
            break
    c, s1, s2 = params_from_r(r)
    return PlaneTransform(G.i, G.j, c, s1, s2), float(lam[0])


def _solve_plane_state(state: CostState, i: int, j: int) -> tuple[PlaneTransform, float, float, GammaMatrix]:
    G = _gamma_state(state, i, j)
    psi, h_max = solve_plane_complex(G)
    h0 = float(G.entries[0, 0])
    scale = max(1.0, float(np.abs(G.entries).max()))
    # same rule as on O(n): a far move must buy more than rounding
    if h_max - h0 <= NOOP_RTOL * scale and np.linalg.norm(psi.r - (1.0, 0.0, 0.0)) > 1e-3:
        psi, h_max = PlaneTransform.identity(i, j), h0
    return psi, h_max, h0, G
