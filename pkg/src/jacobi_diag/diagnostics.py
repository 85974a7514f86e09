"""Post-hoc checks of a run: stationarity, the pairwise Hessian surrogate, rate fits."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .cost import CostState
from .driver import RunTrace
from .gradient import euclidean_gradient, riemannian_generator
from .solvers import GammaMatrix, _gamma_state

__all__ = [
    "HessSurrogate",
    "HessScan",
    "LojasiewiczFit",
    "stationarity_check",
    "hess_surrogate_scan",
    "rate_fit",
    "rate_fit_sequence",
    "diagnostic_report",
    "write_report",
]

STRICT_RTOL = 1e-8
FIT_QUALITY = 0.9
TAIL_EXCLUDE = 5


@dataclass(frozen=True)
class HessSurrogate:
    """``H = 2 (Gamma[1:, 1:] - Gamma[0, 0] I)`` for one pair, eigenvalues descending."""

    i: int
    j: int
    H: np.ndarray
    eigenvalues: np.ndarray
    gamma_norm: float

    @classmethod
    def from_gamma(cls, G: GammaMatrix) -> "HessSurrogate":
        H = G.hessian_surrogate()
        H = (H + H.T) / 2
        lam = np.sort(np.linalg.eigvalsh(H))[::-1]
        return cls(G.i, G.j, H, lam, float(np.linalg.norm(G.entries, 2)))

    @property
    def threshold(self) -> float:
        return -STRICT_RTOL * (1.0 + self.gamma_norm)

    @property
    def margin(self) -> float:
        """Distance of the top eigenvalue below the strictness threshold (positive passes)."""
        return self.threshold - float(self.eigenvalues[0])

    @property
    def negative_definite(self) -> bool:
        return self.margin > 0


@dataclass(frozen=True)
class HessScan:
    pairs: list
    all_negative_definite: bool
    worst_margin: float


@dataclass(frozen=True)
class LojasiewiczFit:
    """Classified convergence rate.

    ``mode == "linear"`` means ``e_k ~ C exp(-c k)`` (``zeta = 1/2``);
    ``"sublinear"`` means ``e_k ~ C k^(-alpha)`` with
    ``alpha = zeta / (1 - 2 zeta)``. ``quality`` is the R^2 of the chosen
    model in log space, clipped to ``[0, 1]``.
    """

    mode: Literal["linear", "sublinear", "undetermined"]
    zeta: float
    c: float
    C: float
    quality: float
    linear_quality: float
    power_quality: float
    points: int


def stationarity_check(spec, X, tol: float = 1e-8) -> tuple[bool, float]:
    """Recompute the Riemannian gradient norm from the original tensors.

    Uses :func:`euclidean_gradient`, which does not touch the cached
    transformed tensors of the driver.
    """
    X = np.asarray(X)
    Lam = X.conj().T @ euclidean_gradient(spec, X)
    norm = float(np.linalg.norm(riemannian_generator(Lam)))
    return norm <= tol, norm


def hess_surrogate_scan(spec, U) -> HessScan:
    """Fit and certify ``Gamma`` for every pair at ``U`` and test ``H`` for strict negativity.

    A pair passes when ``lambda_max(H) < -1e-8 (1 + ||Gamma||_2)``.
    :class:`~jacobi_diag.solvers.CertificationError` propagates.
    """
    if spec.group != "unitary":
        raise TypeError("the Hessian surrogate is defined for costs on U(n)")
    if spec.order > 3:
        raise ValueError("the quadratic-form representation needs order d <= 3")
    state = CostState(spec, U)
    n = spec.dim
    out = [HessSurrogate.from_gamma(_gamma_state(state, i, j)) for i in range(n) for j in range(i + 1, n)]
    worst = min(h.margin for h in out)
    return HessScan(out, worst > 0, worst)


def _r2(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss == 0 else 1.0 - float(resid @ resid) / ss
    return float(coef[0]), float(coef[1]), min(1.0, max(0.0, r2))


def rate_fit_sequence(e, k=None, monotone_rtol: float = 1e-6) -> LojasiewiczFit:
    """Classify a positive error sequence as linear or power-law.

    ``k`` defaults to ``1, 2, ...``. The sequence may not grow by more than
    ``monotone_rtol`` (relative) between consecutive points.
    """
    e = np.asarray(e, dtype=float)
    k = np.arange(1, e.size + 1, dtype=float) if k is None else np.asarray(k, dtype=float)
    if e.size != k.size:
        raise ValueError("e and k must have the same length")
    if e.size < 5:
        raise ValueError(f"need at least 5 points to fit a rate, got {e.size}")
    if np.any(e <= 0) or np.any(k <= 0):
        raise ValueError("errors and iteration indices must be positive")
    if np.any(e[1:] > e[:-1] * (1.0 + monotone_rtol)):
        raise ValueError("error sequence is not monotone over the fitted range")
    y = np.log(e)
    a_lin, slope_lin, q_lin = _r2(k, y)
    a_pow, slope_pow, q_pow = _r2(np.log(k), y)
    if max(q_lin, q_pow) < FIT_QUALITY:
        return LojasiewiczFit("undetermined", math.nan, math.nan, math.nan, max(q_lin, q_pow), q_lin, q_pow, e.size)
    if q_lin >= q_pow:
        return LojasiewiczFit("linear", 0.5, -slope_lin, math.exp(a_lin), q_lin, q_lin, q_pow, e.size)
    alpha = -slope_pow
    if alpha <= 0:
        return LojasiewiczFit("undetermined", math.nan, math.nan, math.nan, q_pow, q_lin, q_pow, e.size)
    return LojasiewiczFit("sublinear", alpha / (1 + 2 * alpha), alpha, math.exp(a_pow), q_pow, q_lin, q_pow, e.size)


def rate_fit(trace: RunTrace, X_star=None, start_rtol: float = 0.1, floor: float = 1e-12,
             monotone_rtol: float = 0.1) -> LojasiewiczFit:
    """Fit the decay of ``e_k = ||X_k - X_star||_F`` along a run.

    ``X_star`` defaults to the final iterate; the last five points are then
    dropped because their distance to it is dominated by rounding. The fit
    covers the local regime: from the first ``k`` with
    ``e_k <= start_rtol * e_0`` while ``e_k > floor``. Steps that leave the
    iterate unchanged repeat ``e_k`` and are skipped.
    """
    if trace.record_level != "full":
        raise ValueError("rate_fit needs record_level='full'")
    Xs = list(trace.iterates())
    if X_star is None:
        X_star = Xs[-1]
        Xs = Xs[:-TAIL_EXCLUDE] if len(Xs) > TAIL_EXCLUDE else []
    X_star = np.asarray(X_star)
    e = np.array([np.linalg.norm(X - X_star) for X in Xs])
    if e.size == 0:
        raise ValueError("trace too short to fit a rate")
    k = np.arange(e.size, dtype=float)
    local = np.nonzero(e <= start_rtol * e[0])[0]
    begin = int(local[0]) if local.size else e.size
    e, k = e[begin:], k[begin:]
    above = np.nonzero(e <= floor)[0]
    stop = int(above[0]) if above.size else e.size
    e, k = e[:stop], k[:stop]
    if e.size:
        moved = np.concatenate([[True], np.diff(e) != 0])
        e, k = e[moved], k[moved]
    return rate_fit_sequence(e, k + 1.0, monotone_rtol)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def diagnostic_report(spec, X, trace: RunTrace | None = None, tol: float = 1e-8) -> dict:
    """Collect the available verdicts for one endpoint into a JSON-ready dict."""
    ok, norm = stationarity_check(spec, X, tol)
    report = {"stationary": ok, "grad_norm": norm, "tol": tol}
    if spec.group == "unitary" and spec.order <= 3:
        scan = hess_surrogate_scan(spec, X)
        report["hessian_surrogate"] = {
            "all_negative_definite": scan.all_negative_definite,
            "worst_margin": scan.worst_margin,
            "pairs": [
                {"i": h.i, "j": h.j, "eigenvalues": h.eigenvalues.tolist(), "margin": h.margin}
                for h in scan.pairs
            ],
        }
    if trace is not None:
        try:
            fit = rate_fit(trace)
            report["rate"] = {k: _jsonable(v) for k, v in asdict(fit).items()}
        except ValueError as exc:
            report["rate"] = {"mode": "undetermined", "error": str(exc)}
    return report


def write_report(report: dict, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, default=_jsonable, allow_nan=False)
        fh.write("\n")
