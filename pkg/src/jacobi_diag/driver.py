"""Jacobi iteration engine on O(n) and U(n).

One loop covers the cyclic (Jacobi-C) and gradient-based (Jacobi-G) pair
rules on both groups; the elementary subproblem is always solved exactly.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .cost import ComplexGeneral, CostState, RealSymmetric, TraceForm
from .gradient import PairDerivatives, delta_bound, jacobi_g_pair, pair_derivatives
from .kernels import group_drift, reorthonormalize
from .rotations import GivensRotation, PlaneTransform, embed, givens_block, psi_block
from .solvers import _solve_angle_state, _solve_plane_state

__all__ = [
    "SolverConfig",
    "RunTrace",
    "run",
    "cyclic_pairs",
    "SafeguardAudit",
    "safeguard_audit",
    "write_trace_csv",
    "read_trace_csv",
    "CSV_HEADER",
]

CSV_HEADER = ["k", "i", "j", "param1", "param2", "param3", "f", "grad_norm",
              "pair_grad", "step_norm", "time_s"]

RESOLVE_RTOL = 1e-13

PairRule = Literal["cyclic", "gradient-max", "gradient-first-cyclic"]


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`run`.

    ``delta`` is used by the gradient rules only and must lie below ``2/n``
    on O(n) and ``sqrt(2)/n`` on U(n). ``sweep_tol`` stops a run when a block
    of ``n(n-1)/2`` iterations gains less than it and the gradient norm has
    not reached a new low over the last ``stall_sweeps`` blocks.
    """

    group: Literal["orthogonal", "unitary"] = "orthogonal"
    pair_rule: PairRule = "cyclic"
    delta: float = 0.1
    grad_tol: float = 1e-8
    sweep_tol: float = 1e-12
    max_iters: int = 10_000
    reorth_period: int = 50
    reorth_drift: float = 1e-9
    seed: int = 0
    record_level: Literal["summary", "full"] = "full"
    stall_sweeps: int = 5

    def __post_init__(self):
        if self.group not in ("orthogonal", "unitary"):
            raise ValueError(f"unknown group {self.group!r}")
        if self.pair_rule not in ("cyclic", "gradient-max", "gradient-first-cyclic"):
            raise ValueError(f"unknown pair rule {self.pair_rule!r}")
        if self.grad_tol <= 0 or self.sweep_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0 or self.reorth_period < 1:
            raise ValueError("max_iters must be >= 0 and reorth_period >= 1")
        if self.record_level not in ("summary", "full"):
            raise ValueError(f"unknown record level {self.record_level!r}")

    @property
    def gradient_rule(self) -> bool:
        return self.pair_rule.startswith("gradient")


@dataclass
class RunTrace:
    """Per-iteration record of one run.

    Row ``0`` describes the starting point. Row ``k >= 1`` holds the pair and
    rotation parameters of step ``k`` (``(theta, 0, 0)`` on O(n),
    ``(c, s1, s2)`` on U(n)), ``f`` and ``grad_norm`` at the new iterate,
    ``pair_grad`` (the selection score of the pair at the previous iterate)
    and ``step_norm = ||X_k - X_{k-1}||``.
    """

    group: str
    rule: str
    delta: float
    n: int
    X0: np.ndarray
    k: list = field(default_factory=list)
    i: list = field(default_factory=list)
    j: list = field(default_factory=list)
    params: list = field(default_factory=list)
    f: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    pair_grad: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    time_s: list = field(default_factory=list)
    drift: list = field(default_factory=list)
    status: str = "max-iters"
    X_final: np.ndarray | None = None
    record_level: str = "full"

    def _append(self, k, i, j, params, f, grad, pair_grad, step, t, drift):
        self.k.append(k)
        self.i.append(i)
        self.j.append(j)
        self.params.append(params)
        self.f.append(f)
        self.grad_norm.append(grad)
        self.pair_grad.append(pair_grad)
        self.step_norm.append(step)
        self.time_s.append(t)
        self.drift.append(drift)

    @property
    def iterations(self) -> int:
        return int(self.k[-1]) if self.k else 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def final_f(self) -> float:
        return float(self.f[-1])

    @property
    def final_grad(self) -> float:
        return float(self.grad_norm[-1])

    def block(self, row: int) -> np.ndarray:
        p = self.params[row]
        if self.group == "orthogonal":
            return givens_block(p[0])
        return psi_block(*p)

    def iterates(self) -> Iterator[np.ndarray]:
        """Replay ``X_0, X_1, ...`` from the recorded rotations."""
        if self.record_level != "full":
            raise ValueError("iterates need record_level='full'")
        X = np.array(self.X0, dtype=float if self.group == "orthogonal" else complex)
        yield X.copy()
        for row in range(1, len(self.k)):
            i, j = self.i[row], self.j[row]
            X[:, [i, j]] = X[:, [i, j]] @ self.block(row)
            yield X.copy()

    def to_csv(self, include_timing: bool = False) -> str:
        buf = io.StringIO()
        _write_rows(self, buf, include_timing)
        return buf.getvalue()


def cyclic_pairs(n: int) -> Iterator[tuple[int, int]]:
    """Endless row-major sweep ``(0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1)``."""
    if n < 2:
        raise ValueError("need n >= 2")
    sweep = [(i, j) for i in range(n) for j in range(i + 1, n)]
    while True:
        yield from sweep


def _check_compatible(spec, cfg: SolverConfig) -> None:
    if isinstance(spec, RealSymmetric):
        ok = cfg.group == "orthogonal"
    elif isinstance(spec, (ComplexGeneral, TraceForm)):
        ok = cfg.group == "unitary"
    else:
        raise TypeError(f"unsupported cost {type(spec).__name__}")
    if not ok:
        raise ValueError(f"{type(spec).__name__} cost is incompatible with group {cfg.group!r}")
    if cfg.gradient_rule and not 0 < cfg.delta < delta_bound(spec.dim, cfg.group):
        raise ValueError(
            f"delta={cfg.delta} outside (0, {delta_bound(spec.dim, cfg.group):.4g}) for n={spec.dim}"
        )


def run(spec, X0=None, cfg: SolverConfig | None = None) -> RunTrace:
    """Run a Jacobi-type algorithm from ``X0`` (identity by default).

    Stops with status ``"converged"`` once the Riemannian gradient norm drops to
    ``cfg.grad_tol``, ``"stalled"`` when a sweep-sized block of iterations
    makes no progress, and ``"max-iters"`` otherwise.
    """
    cfg = cfg or SolverConfig(group=spec.group)
    _check_compatible(spec, cfg)
    n = spec.dim
    X0 = np.eye(n) if X0 is None else np.asarray(X0)
    drift0 = group_drift(X0)
    if drift0 > 1e-8:
        raise ValueError(f"starting point is off the {cfg.group} group (drift {drift0:.2e})")
    if cfg.group == "unitary" and spec.order > 3:
        raise ValueError("unitary Jacobi solver supports costs of order d <= 3")

    state = CostState(spec, X0)
    full = cfg.record_level == "full"
    trace = RunTrace(cfg.group, cfg.pair_rule, cfg.delta, n, np.array(state.X), record_level=cfg.record_level)
    t0 = time.perf_counter()
    pd = pair_derivatives(state)
    f = state.value()
    trace._append(0, -1, -1, (math.nan,) * 3, f, pd.grad_norm, math.nan, 0.0, 0.0, group_drift(state.X))

    sweep_len = n * (n - 1) // 2
    pairs = cyclic_pairs(n)
    cursor = 0
    sweep_f = f
    best_grad, since_best = pd.grad_norm, 0
    last = None
    status = "converged" if pd.grad_norm <= cfg.grad_tol else "max-iters"
    k = 0
    while status != "converged" and k < cfg.max_iters:
        k += 1
        scores = pd.selection_scores()
        if cfg.pair_rule == "cyclic":
            i, j = next(pairs)
        else:
            strategy = "max" if cfg.pair_rule == "gradient-max" else "first-cyclic"
            i, j = jacobi_g_pair(pd, cfg.delta, strategy, cursor)
            cursor = (_pair_index(n, i, j) + 1) % sweep_len
        pair_grad = float(scores[i, j])

        if cfg.group == "orthogonal":
            sol = _solve_angle_state(state, i, j)
            params = (sol.theta, 0.0, 0.0)
            block = givens_block(sol.theta)
            moved = sol.theta != 0.0
        else:
            psi, _, _, _ = _solve_plane_state(state, i, j)
            params = psi.params
            block = psi.block
            moved = params != (1.0, 0.0, 0.0)
        if moved:
            state.apply_block(i, j, block)
        step = float(np.linalg.norm(block - np.eye(2)))

        drift = group_drift(state.X)
        if k % cfg.reorth_period == 0 or drift > cfg.reorth_drift:
            state.set_point(reorthonormalize(state.X, cfg.group))
            drift = group_drift(state.X)

        pd = pair_derivatives(state)
        f = state.value()
        if full:
            trace._append(k, i, j, tuple(float(p) for p in params), f, pd.grad_norm, pair_grad, step,
                          time.perf_counter() - t0, drift)
        else:
            last = (k, i, j, tuple(float(p) for p in params), f, pd.grad_norm, pair_grad, step,
                    time.perf_counter() - t0, drift)

        if pd.grad_norm <= cfg.grad_tol:
            status = "converged"
        elif k % sweep_len == 0:
            # f gains per sweep drop below rounding long before the gradient
            # stops shrinking, so only a gradient plateau counts as a stall
            if pd.grad_norm < best_grad:
                best_grad, since_best = pd.grad_norm, 0
            else:
                since_best += 1
            if f - sweep_f < cfg.sweep_tol and since_best >= cfg.stall_sweeps:
                status = "stalled"
                break
            sweep_f = f

    if not full and last is not None:
        trace._append(*last)
    trace.status = status
    trace.X_final = np.array(state.X)
    return trace


def _pair_index(n: int, i: int, j: int) -> int:
    return i * n - i * (i + 1) // 2 + (j - i - 1)


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SafeguardAudit:
    """Per-step ratios behind the two step conditions.

    ``sigma_k = |f_k - f_{k-1}| / (||grad f(X_{k-1})|| ||X_k - X_{k-1}||)`` and
    ``kappa_k = ||X_k - X_{k-1}|| / ||grad f(X_{k-1})||``. ``sigma`` and
    ``kappa`` are the largest constants satisfied over the tail of the run.
    """

    sigma_k: np.ndarray
    kappa_k: np.ndarray
    sufficient_increase: np.ndarray
    safeguard: np.ndarray
    sigma: float
    kappa: float
    monotone_violations: list
    tail_start: int

    @property
    def monotone(self) -> bool:
        return not self.monotone_violations


def safeguard_audit(trace: RunTrace, sigma: float | None = None, kappa: float | None = None,
                    tail: float = 0.8, monotone_tol: float = 1e-12) -> SafeguardAudit:
    """Check the sufficient-increase and safeguard inequalities along a run.

    Trial constants default to the estimates from the tail (last ``tail``
    fraction of steps). Steps taken at a zero gradient are skipped, and so
    are steps whose ``f`` change is below ``RESOLVE_RTOL (1 + |f|)`` for the
    sufficient-increase ratio.
    """
    if trace.record_level != "full":
        raise ValueError("safeguard_audit needs record_level='full'")
    f = np.asarray(trace.f, dtype=float)
    grad = np.asarray(trace.grad_norm, dtype=float)
    step = np.asarray(trace.step_norm, dtype=float)
    steps = len(f) - 1
    viol = [k for k in range(1, len(f)) if f[k] < f[k - 1] - monotone_tol * (1.0 + abs(f[k - 1]))]
    if steps == 0:
        empty = np.zeros(0)
        return SafeguardAudit(empty, empty, np.zeros(0, bool), np.zeros(0, bool), math.inf, math.inf, viol, 0)
    df = np.abs(np.diff(f))
    g_prev = grad[:-1]
    s = step[1:]
    # an f change within rounding of f says nothing about sufficient increase
    resolved = df > RESOLVE_RTOL * (1.0 + np.abs(f[:-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_k = np.where((g_prev * s > 0) & resolved, df / (g_prev * s), np.inf)
        kappa_k = np.where(g_prev > 0, s / g_prev, np.inf)
    tail_start = int(math.floor((1.0 - tail) * steps))
    sig_est = float(np.min(sigma_k[tail_start:]))
    kap_est = float(np.min(kappa_k[tail_start:]))
    sigma = sig_est if sigma is None else sigma
    kappa = kap_est if kappa is None else kappa
    return SafeguardAudit(
        sigma_k, kappa_k, sigma_k >= sigma, kappa_k >= kappa, sig_est, kap_est, viol, tail_start
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _write_rows(trace: RunTrace, fh, include_timing: bool) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in range(len(trace.k)):
        first = trace.k[r] == 0
        writer.writerow([
            trace.k[r],
            "" if first else trace.i[r],
            "" if first else trace.j[r],
            *(_fmt(p) for p in trace.params[r]),
            _fmt(trace.f[r]),
            _fmt(trace.grad_norm[r]),
            _fmt(trace.pair_grad[r]),
            _fmt(trace.step_norm[r]),
            _fmt(trace.time_s[r]) if include_timing else "",
        ])


def write_trace_csv(trace: RunTrace, path: str | os.PathLike, include_timing: bool = False) -> None:
    """Write the trace; ``time_s`` is left empty unless ``include_timing``.

    Without timing the file is a deterministic function of the inputs. Pair
    indices are 0-based.
    """
    with open(path, "w", newline="", encoding="ascii") as fh:
        _write_rows(trace, fh, include_timing)


def read_trace_csv(path: str | os.PathLike, group: str | None = None, X0=None) -> RunTrace:
    """Rebuild a :class:`RunTrace` from its CSV.

    The group is inferred from the parameters when not given; ``X0`` defaults
    to the identity.
    """
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"{path}: not a trace CSV")
    rows = rows[1:]
    num = lambda s: math.nan if s == "" else float(s)  # noqa: E731
    params = [tuple(num(x) for x in r[3:6]) for r in rows]
    if group is None:
        group = "unitary" if any(p[1] != 0 or p[2] != 0 for p in params[1:]) else "orthogonal"
    n = max([int(r[2]) for r in rows[1:] if r[2] != ""], default=1) + 1
    X0 = np.eye(n) if X0 is None else np.asarray(X0)
    trace = RunTrace(group, "", math.nan, X0.shape[0], X0)
    for r, p in zip(rows, params):
        trace._append(int(r[0]), -1 if r[1] == "" else int(r[1]), -1 if r[2] == "" else int(r[2]),
                      p, num(r[6]), num(r[7]), num(r[8]), num(r[9]), num(r[10]), math.nan)
    trace.X_final = None
    return trace
