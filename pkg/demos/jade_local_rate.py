"""Local behaviour of complex JADE near a nondegenerate optimum.

Three Hermitian matrices that are almost jointly diagonalizable (a common
unitary basis plus a small Hermitian perturbation) are diagonalized on
U(n) with the gradient-max rule. At the limit point we inspect the per-pair
Hessian surrogate, which is negative definite for every pair, and fit the
decay of ||U_k - U*|| against the iteration count. A negative definite
surrogate goes together with a linear rate.

Run with ``python3 demos/jade_local_rate.py``.
"""

import numpy as np

from jacobi_diag import (
    GeneratorDirective,
    SolverConfig,
    generate,
    haar_unitary,
    hess_surrogate_scan,
    rate_fit,
    run,
    stationarity_check,
)

inst = generate(GeneratorDirective("planted-jade", {"n": 5, "L": 3, "commuting": False}, seed=3))
U0 = haar_unitary(5, np.random.default_rng(42))
trace = run(inst.spec, U0, SolverConfig(group="unitary", pair_rule="gradient-max", delta=0.1, grad_tol=1e-10))
print(f"{trace.iterations} iterations, status {trace.status}, f = {trace.final_f:.10f}")

ok, norm = stationarity_check(inst.spec, trace.X_final, tol=1e-10)
print(f"stationary: {ok} (gradient norm {norm:.2e})")

scan = hess_surrogate_scan(inst.spec, trace.X_final)
print("largest surrogate eigenvalue per pair:")
for h in scan.pairs:
    print(f"  ({h.i}, {h.j}): {h.eigenvalues.max(): .4e}")
print("all negative definite:", scan.all_negative_definite)

fit = rate_fit(trace)
print(f"rate fit: {fit.mode}, c = {fit.c:.4f} per iteration, R^2 = {fit.quality:.4f} over {fit.points} points")
