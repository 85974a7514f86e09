import itertools
import math

import numpy as np
import pytest

from jacobi_diag.cost import ComplexGeneral, NamedCost, RealSymmetric, TraceForm
from jacobi_diag.driver import (
    CSV_HEADER,
    SolverConfig,
    cyclic_pairs,
    read_trace_csv,
    run,
    safeguard_audit,
    write_trace_csv,
)
from jacobi_diag.tensor import symmetrize
from tests.oracles import cost_from_scratch, random_orthogonal, random_unitary

RULES = ["cyclic", "gradient-max", "gradient-first-cyclic"]


def _complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _real_spec(rng, n=4, d=3, L=2):
    return RealSymmetric(tuple(symmetrize(rng.standard_normal((n,) * d)) for _ in range(L)))


def test_cyclic_pairs():
    assert list(itertools.islice(cyclic_pairs(3), 5)) == [(0, 1), (0, 2), (1, 2), (0, 1), (0, 2)]
    assert list(itertools.islice(cyclic_pairs(4), 6)) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    with pytest.raises(ValueError):
        next(cyclic_pairs(1))


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.grad_tol, cfg.sweep_tol, cfg.max_iters, cfg.reorth_period) == (1e-8, 1e-12, 10_000, 50)

    @pytest.mark.parametrize("kwargs", [
        {"group": "symplectic"}, {"pair_rule": "random"}, {"grad_tol": 0.0},
        {"max_iters": -1}, {"reorth_period": 0}, {"record_level": "verbose"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestRunReal:
    def test_matrix_one_step(self):
        A = np.array([[1.0, 2.0], [2.0, 5.0]])
        trace = run(RealSymmetric((A,)), cfg=SolverConfig())
        assert trace.converged and trace.iterations == 1
        assert trace.final_f == pytest.approx(np.sum(np.linalg.eigvalsh(A) ** 2), rel=1e-14)
        W = trace.X_final.T @ A @ trace.X_final
        assert abs(W[0, 1]) <= 1e-12

    def test_matrix_gradient_rule(self):
        A = np.array([[1.0, 2.0], [2.0, 5.0]])
        trace = run(RealSymmetric((A,)), cfg=SolverConfig(pair_rule="gradient-max", delta=0.5))
        assert trace.converged
        assert trace.pair_grad[1] == pytest.approx(32.0)

    @pytest.mark.parametrize("rule", RULES)
    def test_monotone_and_consistent(self, rng, rule):
        spec = _real_spec(rng)
        trace = run(spec, random_orthogonal(4, rng), SolverConfig(pair_rule=rule, delta=0.2, max_iters=400))
        f = np.array(trace.f)
        assert np.all(np.diff(f) >= -1e-12 * (1 + np.abs(f[:-1])))
        assert trace.final_f == pytest.approx(cost_from_scratch(spec, trace.X_final), rel=1e-12)
        X = trace.X_final
        assert np.abs(X.T @ X - np.eye(4)).max() <= 1e-12

    def test_cyclic_visits_pairs_in_order(self, rng):
        trace = run(_real_spec(rng), cfg=SolverConfig(max_iters=12))
        pairs = list(zip(trace.i[1:], trace.j[1:]))
        assert pairs == list(itertools.islice(cyclic_pairs(4), len(pairs)))

    @pytest.mark.parametrize("rule", ["gradient-max", "gradient-first-cyclic"])
    def test_selection_inequality(self, rng, rule):
        delta = 0.3
        trace = run(_real_spec(rng), cfg=SolverConfig(pair_rule=rule, delta=delta, max_iters=200))
        for k in range(1, len(trace.k)):
            assert trace.pair_grad[k] >= delta * trace.grad_norm[k - 1] * (1 - 1e-12)

    def test_replay_matches_final(self, rng):
        trace = run(_real_spec(rng), random_orthogonal(4, rng), SolverConfig(max_iters=300))
        X = list(trace.iterates())[-1]
        np.testing.assert_allclose(X, trace.X_final, atol=1e-12)

    def test_converges(self, rng):
        trace = run(_real_spec(rng, n=3), cfg=SolverConfig(pair_rule="gradient-max", delta=0.3))
        assert trace.converged and trace.final_grad <= 1e-8

    def test_summary_record_level(self, rng):
        trace = run(_real_spec(rng), cfg=SolverConfig(max_iters=20, record_level="summary"))
        assert trace.k == [0, 20]
        with pytest.raises(ValueError):
            next(trace.iterates())

    def test_zero_iterations(self, rng):
        trace = run(_real_spec(rng), cfg=SolverConfig(max_iters=0))
        assert trace.k == [0] and trace.status == "max-iters"

    def test_stationary_start(self):
        trace = run(RealSymmetric((np.diag([1.0, 2.0, 3.0]),)))
        assert trace.converged and trace.iterations == 0

    def test_stall(self):
        # after the first exact step the gradient sits at rounding level and stops improving
        spec = RealSymmetric((np.array([[1.0, 2.0], [2.0, 5.0]]),))
        trace = run(spec, cfg=SolverConfig(grad_tol=1e-300, stall_sweeps=5))
        assert trace.status == "stalled"
        assert trace.iterations <= 10

    def test_validation(self, rng):
        spec = _real_spec(rng)
        with pytest.raises(ValueError):
            run(spec, cfg=SolverConfig(group="unitary"))
        with pytest.raises(ValueError):
            run(spec, cfg=SolverConfig(pair_rule="gradient-max", delta=0.5))
        with pytest.raises(ValueError):
            run(spec, 1.01 * np.eye(4))


class TestRunComplex:
    @pytest.mark.parametrize("rule", RULES)
    def test_jade(self, rng, rule):
        mats = [_complex(rng, (3, 3)) for _ in range(3)]
        spec = NamedCost("jade", {"matrices": mats}).expand()
        U0 = random_unitary(3, rng)
        trace = run(spec, U0, SolverConfig(group="unitary", pair_rule=rule, delta=0.2, max_iters=300))
        f = np.array(trace.f)
        assert np.all(np.diff(f) >= -1e-12 * (1 + np.abs(f[:-1])))
        assert trace.final_f == pytest.approx(cost_from_scratch(spec, trace.X_final), rel=1e-12)
        U = trace.X_final
        assert np.abs(U.conj().T @ U - np.eye(3)).max() <= 1e-12

    def test_commuting_jade_diagonalized(self, rng):
        V = random_unitary(3, rng)
        mats = [V @ np.diag(rng.standard_normal(3)) @ V.conj().T for _ in range(3)]
        spec = NamedCost("jade", {"matrices": mats}).expand()
        trace = run(spec, cfg=SolverConfig(group="unitary"))
        assert trace.converged
        U = trace.X_final
        for A in mats:
            W = U.conj().T @ A @ U
            assert np.abs(W - np.diag(np.diag(W))).max() <= 1e-6

    def test_trace_form(self, rng):
        B = _complex(rng, (3,) * 4)
        spec = TraceForm((B + B.transpose(2, 3, 0, 1).conj()) / 2)
        trace = run(spec, cfg=SolverConfig(group="unitary", max_iters=200))
        f = np.array(trace.f)
        assert np.all(np.diff(f) >= -1e-12 * (1 + np.abs(f[:-1])))

    def test_replay(self, rng):
        spec = NamedCost("complex3", {"tensor": _complex(rng, (3, 3, 3))}).expand()
        trace = run(spec, cfg=SolverConfig(group="unitary", max_iters=60))
        np.testing.assert_allclose(list(trace.iterates())[-1], trace.X_final, atol=1e-12)

    def test_order_limit(self, rng):
        spec = ComplexGeneral(((_complex(rng, (3,) * 4), 2, 1.0),))
        with pytest.raises(ValueError):
            run(spec, cfg=SolverConfig(group="unitary"))


class TestAudit:
    def test_real_run(self, rng):
        trace = run(_real_spec(rng, n=3), cfg=SolverConfig(pair_rule="gradient-max", delta=0.3))
        audit = safeguard_audit(trace)
        assert audit.monotone
        assert audit.sigma > 0 and audit.kappa > 0
        assert audit.sufficient_increase[audit.tail_start:].all()

    def test_detects_decrease(self, rng):
        trace = run(_real_spec(rng), cfg=SolverConfig(max_iters=10))
        trace.f[5] = trace.f[4] - 1.0
        assert safeguard_audit(trace).monotone_violations == [5]

    def test_trial_constants(self, rng):
        trace = run(_real_spec(rng), cfg=SolverConfig(max_iters=50))
        audit = safeguard_audit(trace, sigma=1e300, kappa=0.0)
        assert audit.safeguard.all()
        assert not audit.sufficient_increase.any()


class TestCsv:
    def test_round_trip_real(self, rng, tmp_path):
        trace = run(_real_spec(rng), cfg=SolverConfig(pair_rule="gradient-max", delta=0.2, max_iters=80))
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == CSV_HEADER
        assert lines[1].startswith("0,,,")
        assert all(line.endswith(",") for line in lines[1:])
        back = read_trace_csv(path)
        assert back.group == "orthogonal"
        assert back.f == trace.f and back.grad_norm == trace.grad_norm
        assert back.i[1:] == trace.i[1:] and back.j[1:] == trace.j[1:]
        np.testing.assert_allclose(list(back.iterates())[-1], trace.X_final, atol=1e-12)

    def test_round_trip_complex(self, rng, tmp_path):
        spec = NamedCost("complex3", {"tensor": _complex(rng, (3, 3, 3))}).expand()
        trace = run(spec, cfg=SolverConfig(group="unitary", max_iters=30))
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        back = read_trace_csv(path)
        assert back.group == "unitary"
        assert back.params[1:] == trace.params[1:]
        np.testing.assert_allclose(list(back.iterates())[-1], trace.X_final, atol=1e-12)

    def test_timing_column(self, rng, tmp_path):
        trace = run(_real_spec(rng), cfg=SolverConfig(max_iters=5))
        rows = [line.split(",") for line in trace.to_csv(include_timing=True).splitlines()[1:]]
        assert all(r[-1] != "" for r in rows)
        assert not math.isnan(float(rows[-1][-1]))

    def test_deterministic(self, rng):
        spec = _real_spec(rng)
        X0 = random_orthogonal(4, rng)
        cfg = SolverConfig(pair_rule="gradient-first-cyclic", delta=0.2, max_iters=100)
        assert run(spec, X0, cfg).to_csv() == run(spec, X0, cfg).to_csv()

    def test_rejects_foreign_csv(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_trace_csv(tmp_path / "x.csv")
