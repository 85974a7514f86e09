"""Classical Jacobi on a symmetric matrix.

For a single matrix (order 2, one term) the cost f(Q) = ||diag(Q^T A Q)||^2
is maximized exactly when Q^T A Q is diagonal, so the iteration reduces to
the textbook Jacobi eigenvalue method. This script checks the final
diagonal against numpy's eigvalsh and shows how the pair rules differ.

Run with ``python3 demos/matrix_jacobi.py``.
"""

import numpy as np

from jacobi_diag import RealSymmetric, SolverConfig, run

rng = np.random.default_rng(7)
G = rng.standard_normal((8, 8))
A = (G + G.T) / 2
spec = RealSymmetric((A,))

print("eigenvalues (eigvalsh):", np.round(np.linalg.eigvalsh(A), 6))
for rule in ("cyclic", "gradient-max", "gradient-first-cyclic"):
    trace = run(spec, cfg=SolverConfig(pair_rule=rule, delta=0.1))
    W = trace.X_final.T @ A @ trace.X_final
    off = np.linalg.norm(W - np.diag(np.diag(W)))
    print(f"\n{rule}: {trace.iterations} plane rotations, status {trace.status}")
    print("  sorted diagonal:", np.round(np.sort(np.diag(W)), 6))
    print(f"  off-diagonal norm {off:.1e}, f = {trace.final_f:.12f}")

print(f"\nsum of squared eigenvalues: {np.sum(np.linalg.eigvalsh(A) ** 2):.12f}")
