"""Elementary moves on O(n) and U(n) and their action on cached tensors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GivensRotation",
    "PlaneTransform",
    "givens_block",
    "psi_block",
    "r_vector",
    "params_from_r",
    "embed",
    "apply_rotation",
]

SPHERE_TOL = 1e-12


def givens_block(theta):
    """2x2 rotation ``[[c, -s], [s, c]]``; vectorized over ``theta``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def psi_block(c, s1, s2):
    """``[[c, -(s1 + i s2)], [s1 - i s2, c]]``; vectorized over the parameters."""
    c, s1, s2 = (np.asarray(x, dtype=float) for x in (c, s1, s2))
    c = c.astype(complex)
    return np.stack(
        [np.stack([c, -(s1 + 1j * s2)], -1), np.stack([s1 - 1j * s2, c], -1)], -2
    )


def r_vector(c, s1, s2) -> np.ndarray:
    """``(2c^2 - 1, -2 c s1, -2 c s2)``, a unit vector whenever (c, s1, s2) is."""
    c, s1, s2 = (np.asarray(x, dtype=float) for x in (c, s1, s2))
    return np.stack([2 * c * c - 1, -2 * c * s1, -2 * c * s2], -1)


def params_from_r(r, c_floor: float = 1e-8) -> tuple[float, float, float]:
    """Inverse of :func:`r_vector` with ``c >= 0``.

    At ``c == 0`` every unit ``(s1, s2)`` maps to ``r = (-1, 0, 0)``; the
    representative ``s1 = 1, s2 = 0`` is returned.
    """
    r = np.asarray(r, dtype=float)
    r = r / np.linalg.norm(r)
    c = math.sqrt(max(0.0, (1.0 + r[0]) / 2.0))
    if c <= c_floor:
        return 0.0, 1.0, 0.0
    s1, s2 = -r[1] / (2 * c), -r[2] / (2 * c)
    # absorb rounding so the triple is on the sphere
    norm = math.sqrt(c * c + s1 * s1 + s2 * s2)
    return float(c / norm), float(s1 / norm), float(s2 / norm)


@dataclass(frozen=True)
class GivensRotation:
    """Rotation by ``theta`` in the ``(i, j)`` coordinate plane (0-based, ``i < j``)."""

    i: int
    j: int
    theta: float

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ValueError(f"need 0 <= i < j, got ({self.i}, {self.j})")

    @property
    def block(self) -> np.ndarray:
        return givens_block(self.theta)

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.theta, 0.0, 0.0)

    def matrix(self, n: int) -> np.ndarray:
        return embed(self.block, self.i, self.j, n)


@dataclass(frozen=True)
class PlaneTransform:
    """Unitary 2x2 block ``Psi(c, s1, s2)`` acting in the ``(i, j)`` plane."""

    i: int
    j: int
    c: float
    s1: float
    s2: float

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ValueError(f"need 0 <= i < j, got ({self.i}, {self.j})")
        radius = self.c**2 + self.s1**2 + self.s2**2
        if abs(radius - 1.0) > SPHERE_TOL:
            raise ValueError(f"(c, s1, s2) is off the unit sphere by {abs(radius - 1):.2e}")
        if self.c < 0:
            raise ValueError("c must be nonnegative")

    @classmethod
    def identity(cls, i: int, j: int) -> "PlaneTransform":
        return cls(i, j, 1.0, 0.0, 0.0)

    @property
    def block(self) -> np.ndarray:
        return psi_block(self.c, self.s1, self.s2)

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.c, self.s1, self.s2)

    @property
    def r(self) -> np.ndarray:
        return r_vector(self.c, self.s1, self.s2)

    def matrix(self, n: int) -> np.ndarray:
        return embed(self.block, self.i, self.j, n)


def embed(block, i: int, j: int, n: int) -> np.ndarray:
    """Identity of size ``n`` with rows/cols ``(i, j)`` replaced by ``block``."""
    block = np.asarray(block)
    if not 0 <= i < j < n:
        raise ValueError(f"pair ({i}, {j}) out of range for n={n}")
    G = np.eye(n, dtype=block.dtype)
    G[np.ix_([i, j], [i, j])] = block
    return G


def _rotate_slices(W: np.ndarray, i: int, j: int, M: np.ndarray, mode: int) -> None:
    # W x_mode M restricted to the rows i, j of that mode (M is 2x2), in place
    V = np.moveaxis(W, mode, 0)
    rows = V[[i, j]]
    V[[i, j]] = np.tensordot(M, rows, axes=1)


def apply_rotation(Wlist, rot, conj_patterns=None) -> list[np.ndarray]:
    """Update transformed tensors after ``X <- X G(i, j, .)``.

    Each tensor ``W`` becomes ``W x_m G^T`` on plain modes and ``W x_m G^H``
    on conjugated modes; only slices with an index in ``{i, j}`` change.

    Parameters
    ----------
    Wlist : sequence of ndarray
        Current transformed tensors. They are copied, not modified.
    rot : GivensRotation or PlaneTransform
    conj_patterns : sequence of tuple of bool, optional
        Per tensor, which modes carry ``U^H``. Defaults to none.
    """
    out = []
    for k, W in enumerate(Wlist):
        W = np.array(W, dtype=np.result_type(W, rot.block))
        pattern = conj_patterns[k] if conj_patterns is not None else (False,) * W.ndim
        apply_block_inplace(W, rot.i, rot.j, rot.block, pattern)
        out.append(W)
    return out


def apply_block_inplace(W: np.ndarray, i: int, j: int, block: np.ndarray, conj) -> None:
    BT = block.T
    BH = block.conj().T
    for mode in range(W.ndim):
        _rotate_slices(W, i, j, BH if conj[mode] else BT, mode)
