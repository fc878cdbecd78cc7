import numpy as np
import pytest

from zofw.constraints import L1Ball, L2Ball
from zofw.data import synth_logistic
from zofw.objectives import FiniteSumObjective, LogisticObjective, QuadraticExampleObjective, QueryOracle
from zofw.schedules import GammaSchedule, MuSchedule
from zofw.solvers import (
    FULL,
    MINIBATCH,
    SOLVERS,
    SolverConfig,
    acc_szofw,
    acc_szofw_queries,
    iterations_for_budget,
    pgd_reference,
    zofwgd,
    zofwgd_queries,
    zofwsgd,
    zofwsgd_queries,
    zsfw_dvr,
    zsfw_dvr_queries,
)


def quad_cfg(**kw):
    obj = QuadraticExampleObjective(1.0, 2)
    L, L_hat = obj.smoothness()
    C = L1Ball(1.0)
    base = dict(T=200, p=0.5, b=2, sample_size=1,
                gamma=GammaSchedule.convex_ss(0.5, 2, 2, 200),
                mu=MuSchedule.thm1(L, L_hat, C.diameter(), 0.5, 1, 2))
    base.update(kw)
    return obj, C, SolverConfig(**base)


def test_quadratic_example_reaches_optimum():
    finals = []
    for seed in range(10):
        obj, C, cfg = quad_cfg(seed=seed)
        x, tr, _ = zsfw_dvr(QueryOracle(obj), C, cfg, monitor=obj)
        assert len(tr) == 201
        finals.append(tr.f_values[-1])
    assert np.median(finals) <= 1e-3


def test_p_one_is_always_full():
    obj, C, cfg = quad_cfg(p=1.0, T=30)
    q = QueryOracle(obj)
    _, tr, branches = zsfw_dvr(q, C, cfg, monitor=obj)
    assert branches == [FULL] * 30
    assert q.queries == 2 * 2 * 2 * 31


def test_zero_step_freezes_iterate():
    obj, C, cfg = quad_cfg(gamma=GammaSchedule.constant(0.0), T=20)
    x0 = np.array([0.3, -0.2])
    x, tr, _ = zsfw_dvr(QueryOracle(obj), C, cfg, monitor=obj, x0=x0)
    np.testing.assert_array_equal(x, x0)
    assert np.all(tr.f_values == tr.f_values[0])


def exact_fw(obj, C, gamma, T, x0=None):
    x = np.zeros(obj.d) if x0 is None else x0.copy()
    xs = [x]
    for t in range(T):
        x = x + gamma.at(t) * (C.lmo(obj.gradient(x)) - x)
        xs.append(x)
    return np.array(xs)


def trajectory(solver, obj, C, cfg, x0=None):
    xs = []
    solver(QueryOracle(obj), C, cfg, x0=x0, callback=lambda t, x, q: xs.append(x))
    return np.array(xs)


def test_zofwgd_is_exact_fw_on_quadratics():
    obj = QuadraticExampleObjective(0.5, 4)
    C = L2Ball(1.0)
    g = GammaSchedule.harmonic(2.0)
    x0 = np.array([0.5, -0.5, 0.2, 0.1])
    cfg = SolverConfig(T=25, gamma=g, mu=MuSchedule.constant(0.1))
    np.testing.assert_allclose(trajectory(zofwgd, obj, C, cfg, x0), exact_fw(obj, C, g, 25, x0), atol=1e-10)


class ShiftedQuadratic(FiniteSumObjective):
    """``f_i(x) = |x - c_i|^2 / 2``: every component has the same Hessian."""

    def __init__(self, centers):
        self.c = np.asarray(centers, dtype=float)
        self.n, self.d = self.c.shape

    def _values(self, indices, X):
        c = self.c if indices is None else self.c[indices]
        return 0.5 * ((X[None, :, :] - c[:, None, :]) ** 2).sum(axis=2)

    def gradient(self, x):
        return x - self.c.mean(axis=0)


def test_acc_szofw_tracks_exact_gradient_on_quadratics():
    obj = ShiftedQuadratic(np.random.default_rng(0).standard_normal((6, 4)))
    C = L2Ball(1.0)
    g = GammaSchedule.harmonic(2.0)
    x0 = np.array([0.5, -0.5, 0.2, 0.1])
    ref = exact_fw(obj, C, g, 25, x0)
    for q in (1, 4):
        cfg = SolverConfig(T=25, q=q, batch=2, gamma=g, mu=MuSchedule.constant(0.1))
        np.testing.assert_allclose(trajectory(acc_szofw, obj, C, cfg, x0), ref, atol=1e-10)


def test_acc_szofw_q1_is_zofwgd():
    obj = QuadraticExampleObjective(0.5, 4)
    C = L1Ball(1.0)
    cfg = SolverConfig(T=25, q=1, batch=2, mu=MuSchedule.constant(0.1))
    np.testing.assert_array_equal(trajectory(acc_szofw, obj, C, cfg), trajectory(zofwgd, obj, C, cfg))


@pytest.fixture(scope="module")
def small_logistic():
    ds, _ = synth_logistic(10, 5, sparsity=0.8, label_noise=0.1, seed=0)
    return LogisticObjective(ds)


def test_meter_per_iteration(small_logistic):
    obj, C = small_logistic, L1Ball(1.0)
    q = QueryOracle(obj)
    zofwgd(q, C, SolverConfig(T=1))
    assert q.queries == 100
    q = QueryOracle(obj)
    zofwsgd(q, C, SolverConfig(T=1, b=2, batch=8))
    assert q.queries == 32
    q = QueryOracle(obj)
    acc_szofw(q, C, SolverConfig(T=4, q=4, batch=2))
    assert q.queries == 100 + 3 * 40


def test_meter_closed_forms(small_logistic):
    obj, C = small_logistic, L1Ball(1.0)
    rng = np.random.default_rng(0)
    for k in range(20):
        T, b, S, batch = rng.integers(1, 30), rng.integers(1, 5), rng.integers(1, 6), rng.integers(1, 6)
        p, qq = rng.uniform(0.05, 1.0), rng.integers(1, 6)
        cfg = SolverConfig(T=int(T), seed=k, p=p, b=int(b), sample_size=int(S), batch=int(batch), q=int(qq))
        o = QueryOracle(obj)
        _, tr, br = zsfw_dvr(o, C, cfg)
        assert o.queries == zsfw_dvr_queries(br, obj.n, b, S) == tr.queries[-1]
        o = QueryOracle(obj)
        zofwgd(o, C, cfg)
        assert o.queries == zofwgd_queries(T, obj.n, obj.d)
        o = QueryOracle(obj)
        zofwsgd(o, C, cfg)
        assert o.queries == zofwsgd_queries(T, b, batch)
        o = QueryOracle(obj)
        _, _, br = acc_szofw(o, C, cfg)
        assert o.queries == acc_szofw_queries(br, obj.n, obj.d, batch)


def test_zofwsgd_full_batch_is_unbiased():
    obj = QuadraticExampleObjective(1.0, 3)
    x = np.array([0.4, -0.2, 0.1])
    from zofw.estimators import estimate_batch
    from zofw.numerics import GaussianSampler

    q = QueryOracle(obj)
    rng = GaussianSampler(0)
    m = 20_000
    est = np.array([estimate_batch(q.subset(rng.indices(3, 3)), x, rng.gaussian_matrix(3, 2), 1e-3)
                    for _ in range(m)])
    se = est.std(axis=0, ddof=1) / np.sqrt(m)
    assert np.all(np.abs(est.mean(axis=0) - obj.gradient(x)) <= 3 * se)


@pytest.mark.parametrize("name", sorted(SOLVERS))
def test_determinism_and_feasibility(name, small_logistic):
    obj, C = small_logistic, L1Ball(0.5)
    cfg = SolverConfig(T=40, seed=3, p=0.3, b=2, sample_size=2, batch=3, q=3, record_gap=True)
    a = SOLVERS[name](QueryOracle(obj), C, cfg, monitor=obj)
    b = SOLVERS[name](QueryOracle(obj), C, cfg, monitor=obj)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.trace.f_values.tobytes() == b.trace.f_values.tobytes()
    assert a.trace.branches == b.trace.branches
    xs = trajectory(SOLVERS[name], obj, C, SolverConfig(T=40, seed=3, p=0.3, b=2, sample_size=2, batch=3, q=3))
    assert all(C.contains(x) for x in xs)
    assert np.all(np.diff(a.trace.queries) >= 0)
    assert np.all(a.trace.fw_gaps >= -1e-9)


def test_seed_changes_stochastic_solvers(small_logistic):
    C = L1Ball(1.0)
    a = zsfw_dvr(QueryOracle(small_logistic), C, SolverConfig(T=20, seed=1, p=0.5))
    b = zsfw_dvr(QueryOracle(small_logistic), C, SolverConfig(T=20, seed=2, p=0.5))
    assert not np.array_equal(a.x, b.x)


def test_branch_mix_follows_p(small_logistic):
    _, _, br = zsfw_dvr(QueryOracle(small_logistic), L1Ball(1.0), SolverConfig(T=2000, p=0.25))
    frac = br.count(FULL) / len(br)
    assert abs(frac - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / 2000)
    assert set(br) <= {FULL, MINIBATCH}


def test_budget_stops_run(small_logistic):
    q = QueryOracle(small_logistic)
    _, tr, _ = zofwgd(q, L1Ball(1.0), SolverConfig(T=1000, max_queries=1000))
    assert q.queries == 1000 and len(tr) == 11


def test_iterations_for_budget():
    assert iterations_for_budget(2 * 10 * 2 + 100 * (0.5 * 40 + 0.5 * 16), 10, 2, 0.5, 2) == 100


def test_mu_clamp_is_recorded():
    obj, C, cfg = quad_cfg(mu=MuSchedule.thm1(1.0, 1.0, 1e-20, 0.5, 1, 2), T=3)
    _, tr, _ = zsfw_dvr(QueryOracle(obj), C, cfg)
    assert tr.warnings and "clamped" in tr.warnings[0]


def test_sample_size_cannot_exceed_n(small_logistic):
    with pytest.raises(ValueError):
        zsfw_dvr(QueryOracle(small_logistic), L1Ball(1.0), SolverConfig(T=1, sample_size=11))
    with pytest.raises(ValueError):
        SolverConfig(T=1, p=0.0)
    with pytest.raises(ValueError):
        zsfw_dvr(QueryOracle(small_logistic), L1Ball(1.0), SolverConfig(T=1, record_gap=True))


def test_pgd_reference_quadratic():
    ref = pgd_reference(QuadraticExampleObjective(1.0, 3), L1Ball(1.0), x0=np.array([0.3, 0.3, -0.3]))
    assert ref.f == 0.0
    np.testing.assert_array_equal(ref.x, np.zeros(3))
    assert ref.gap <= 1e-10


def test_pgd_reference_logistic_certificate():
    ds, _ = synth_logistic(200, 50, sparsity=0.2, label_noise=0.1, seed=1)
    obj, C = LogisticObjective(ds), L1Ball(2.0)
    ref = pgd_reference(obj, C, iters=10_000)
    assert C.contains(ref.x)
    assert ref.gap <= 1e-8
    other = pgd_reference(obj, C, iters=10_000, lr=0.37 / obj.smoothness()[0])
    assert abs(other.f - ref.f) <= 1e-9


def test_numeric_error_reports_iteration():
    class Cliff(FiniteSumObjective):
        n, d = 2, 2

        def _values(self, indices, X):
            k = self.n if indices is None else len(indices)
            v = np.where(np.abs(X).sum(axis=1) > 0.3, np.nan, (X * X).sum(axis=1))
            return np.broadcast_to(v, (k, len(X))).copy()

    cfg = SolverConfig(T=50, p=0.5, gamma=GammaSchedule.constant(0.1), mu=MuSchedule.constant(1e-3))
    with pytest.raises(FloatingPointError, match="iteration"):
        zsfw_dvr(QueryOracle(Cliff()), L1Ball(1.0), cfg)
