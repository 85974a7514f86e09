import math

import numpy as np
import pytest

from jacobi_diag.cost import ComplexGeneral, CostState, NamedCost, RealSymmetric, TraceForm, transformed_tensors
from jacobi_diag.gradient import (
    PairDerivatives,
    delta_bound,
    euclidean_gradient,
    jacobi_g_pair,
    pair_derivatives,
    pair_derivatives_real,
    riemann_gradient_complex,
)
from jacobi_diag.kernels import fd_directional
from jacobi_diag.solvers import solve_angle_real
from jacobi_diag.tensor import symmetrize
from tests.oracles import cost_from_scratch, plane, random_orthogonal, random_unitary


def _complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _hermitian_paired(rng, n):
    B = _complex(rng, (n,) * 4)
    return (B + B.transpose(2, 3, 0, 1).conj()) / 2


def _complex_specs(rng, n=3):
    return {
        "jade": NamedCost("jade", {"matrices": [_complex(rng, (n, n)) for _ in range(3)]}).expand(),
        "complex3": NamedCost("complex3", {"tensor": _complex(rng, (n,) * 3)}).expand(),
        "trace": TraceForm(_hermitian_paired(rng, n)),
        "mixed": ComplexGeneral(((_complex(rng, (n,) * 3), 2, 1.0), (_complex(rng, (n, n)), 1, -0.3))),
    }


def _euclidean_fd(spec, X, step=1e-6):
    # derivative of f along each matrix entry, real and imaginary parts separately
    X = np.asarray(X)
    G = np.zeros(X.shape, dtype=complex)
    directions = (1.0, 1j) if np.iscomplexobj(X) else (1.0,)
    for a in range(X.shape[0]):
        for b in range(X.shape[1]):
            for unit in directions:
                E = np.zeros(X.shape, dtype=X.dtype)
                E[a, b] = unit
                d = (cost_from_scratch(spec, X + step * E) - cost_from_scratch(spec, X - step * E)) / (2 * step)
                G[a, b] += d if unit == 1.0 else 1j * d
    return G if np.iscomplexobj(X) else G.real


class TestRealPairDerivatives:
    def test_matrix_example(self):
        spec = RealSymmetric((np.array([[1.0, 2.0], [2.0, 5.0]]),))
        pd = pair_derivatives_real(spec, transformed_tensors(spec, np.eye(2)))
        assert pd.g[0, 1] == pytest.approx(32.0, abs=1e-12)
        assert pd.grad_norm == pytest.approx(32.0 / math.sqrt(2.0), abs=1e-12)
        assert pd.g[1, 0] == 0.0

    def test_matrix_example_fd(self):
        spec = RealSymmetric((np.array([[1.0, 2.0], [2.0, 5.0]]),))
        D = np.array([[0.0, 1.0], [-1.0, 0.0]])
        fd = fd_directional(lambda X: cost_from_scratch(spec, X), np.eye(2), D, 1e-5, "orthogonal")
        assert fd == pytest.approx(32.0, abs=1e-6)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_against_fd(self, rng, d):
        n = 4
        spec = RealSymmetric(tuple(symmetrize(rng.standard_normal((n,) * d)) for _ in range(2)))
        Q = random_orthogonal(n, rng)
        pd = pair_derivatives(CostState(spec, Q))
        scale = max(1.0, abs(cost_from_scratch(spec, Q)))
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n))
                E[i, j], E[j, i] = 1.0, -1.0
                fd = fd_directional(lambda X: cost_from_scratch(spec, X), Q, Q @ E, 1e-5, "orthogonal")
                assert pd.g[i, j] == pytest.approx(fd, abs=1e-6 * scale)

    def test_is_minus_restricted_slope(self, rng):
        spec = RealSymmetric((symmetrize(rng.standard_normal((3, 3, 3))),))
        Q = random_orthogonal(3, rng)
        pd = pair_derivatives(CostState(spec, Q))
        sol = solve_angle_real(spec, Q, 0, 2)
        assert pd.g[0, 2] == pytest.approx(-sol.poly.derivative()(0.0), rel=1e-10)

    def test_grad_norm_matches_projection(self, rng):
        spec = RealSymmetric((symmetrize(rng.standard_normal((4, 4, 4))),))
        Q = random_orthogonal(4, rng)
        Lam = Q.T @ euclidean_gradient(spec, Q)
        P = (Lam - Lam.T) / 2
        pd = pair_derivatives(CostState(spec, Q))
        assert pd.grad_norm == pytest.approx(np.linalg.norm(P), rel=1e-12)

    def test_stationary_diagonal(self):
        spec = RealSymmetric((np.diag([1.0, 2.0, 3.0]),))
        pd = pair_derivatives(CostState(spec, np.eye(3)))
        assert pd.grad_norm == 0.0

    def test_rejects_complex(self):
        with pytest.raises(TypeError):
            pair_derivatives_real(ComplexGeneral(((np.eye(2), 1, 1.0),)), [np.eye(2)])


class TestEuclideanGradient:
    def test_real(self, rng):
        spec = RealSymmetric((symmetrize(rng.standard_normal((3, 3, 3))),))
        X = random_orthogonal(3, rng)
        np.testing.assert_allclose(euclidean_gradient(spec, X), _euclidean_fd(spec, X), atol=1e-7)

    @pytest.mark.parametrize("kind", ["jade", "complex3", "trace", "mixed"])
    def test_complex(self, rng, kind):
        spec = _complex_specs(rng)[kind]
        U = random_unitary(3, rng)
        np.testing.assert_allclose(euclidean_gradient(spec, U), _euclidean_fd(spec, U), atol=1e-7)


class TestComplexGradient:
    @pytest.mark.parametrize("kind", ["jade", "complex3", "trace", "mixed"])
    def test_contract_matches_fd(self, rng, kind):
        spec = _complex_specs(rng)[kind]
        U = random_unitary(3, rng)
        a = riemann_gradient_complex(spec, U)
        b = riemann_gradient_complex(spec, U, method="fd")
        np.testing.assert_allclose(a.local_norms, b.local_norms, atol=1e-7)
        assert a.grad_norm == pytest.approx(b.grad_norm, abs=1e-7)

    def test_local_norm_is_restricted_gradient(self, rng):
        spec = _complex_specs(rng)["complex3"]
        U = random_unitary(3, rng)
        pd = riemann_gradient_complex(spec, U)
        h = 1e-5
        i, j = 0, 2

        def slope(kind):
            def at(t):
                s1, s2 = (math.sin(t), 0.0) if kind == 1 else (0.0, math.sin(t))
                return cost_from_scratch(spec, U @ plane(3, i, j, math.cos(t), s1, s2))
            return (at(h) - at(-h)) / (2 * h)

        # each coordinate curve moves with Frobenius speed sqrt(2)
        expected = math.hypot(slope(1), slope(2)) / math.sqrt(2.0)
        assert pd.local_norms[i, j] == pytest.approx(expected, rel=1e-7)

    def test_norm_identity(self, rng):
        spec = _complex_specs(rng)["jade"]
        pd = riemann_gradient_complex(spec, random_unitary(3, rng))
        assert pd.grad_norm == pytest.approx(math.sqrt(np.sum(pd.local_norms**2)), rel=1e-12)

    def test_diagonal_jade_is_stationary(self):
        spec = NamedCost("jade", {"matrices": [np.diag([1.0, 2.0, 3.0]), np.diag([0.0, 1.0, -1.0])]}).expand()
        assert riemann_gradient_complex(spec, np.eye(3)).grad_norm <= 1e-14

    def test_rejects_real(self):
        with pytest.raises(TypeError):
            riemann_gradient_complex(RealSymmetric((np.eye(2),)), np.eye(2))


class TestPairSelection:
    def test_delta_bounds(self):
        assert delta_bound(4, "orthogonal") == 0.5
        assert delta_bound(4, "unitary") == pytest.approx(math.sqrt(2) / 4)

    def test_max(self):
        g = np.zeros((3, 3))
        g[0, 1], g[0, 2], g[1, 2] = 1.0, -5.0, 2.0
        pd = PairDerivatives(g, math.sqrt(np.sum(g**2) / 2))
        assert jacobi_g_pair(pd, 0.1) == (0, 2)

    def test_first_cyclic(self):
        g = np.zeros((3, 3))
        g[0, 1], g[0, 2], g[1, 2] = 0.01, 3.0, 3.0
        pd = PairDerivatives(g, math.sqrt(np.sum(g**2) / 2))
        assert jacobi_g_pair(pd, 0.5, "first-cyclic") == (0, 2)
        assert jacobi_g_pair(pd, 0.5, "first-cyclic", start=2) == (1, 2)
        assert jacobi_g_pair(pd, 0.5, "first-cyclic", start=3) == (0, 2)

    def test_invalid(self):
        g = np.zeros((3, 3))
        g[0, 1] = 1.0
        pd = PairDerivatives(g, math.sqrt(0.5))
        with pytest.raises(ValueError):
            jacobi_g_pair(pd, 2 / 3)
        with pytest.raises(ValueError):
            jacobi_g_pair(pd, 0.1, "random")
        with pytest.raises(ValueError):
            jacobi_g_pair(PairDerivatives(np.zeros((3, 3)), 0.0), 0.1)

    @pytest.mark.parametrize("group", ["orthogonal", "unitary"])
    def test_pigeonhole(self, rng, group):
        for n in (2, 3, 5, 8):
            for _ in range(50):
                vals = np.abs(rng.standard_normal((n, n))) ** 3
                g = np.triu(vals, 1)
                if group == "orthogonal":
                    pd = PairDerivatives(g, math.sqrt(np.sum(g**2) / 2))
                else:
                    pd = PairDerivatives(g, math.sqrt(np.sum(g**2)), "unitary", g)
                delta = delta_bound(n, group) * (1 - 1e-9)
                i, j = jacobi_g_pair(pd, delta)
                assert pd.selection_scores()[i, j] >= delta * pd.grad_norm
