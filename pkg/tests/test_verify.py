"""Independent oracles: finite differences, brute-force search, weight-bound
sweeps, and the in/out-of-region step decomposition."""
import itertools
import math

import numpy as np
import pytest

from softmix.data import DataSet, LabeledSample, ParamSet
from softmix.em import EMConfig
from softmix.losses import LossModel, certify, loss_gradient
from softmix.softmin import SoftMinConfig, empirical_loss
from softmix.verify import (
    GridSpec,
    brute_force_minimize,
    check_lemma_bounds,
    finite_diff_gradient,
    step_decomposition,
)


class TestFiniteDifferences:
    def test_exact_on_quadratics(self):
        model = LossModel("ridge", lam=0.3)
        sample = LabeledSample(x=np.array([0.7, -1.1]), y=0.4)
        theta = np.array([0.2, 0.5])
        for h in (1e-3, 1e-5):
            got = finite_diff_gradient(model, sample, theta, h=h)
            np.testing.assert_allclose(got, loss_gradient(model, sample, theta), atol=1e-8)

    def test_logistic_hand_value(self):
        model = LossModel("logistic", lam=0.0)
        sample = LabeledSample(x=np.array([1.0]), y=1.0)
        got = finite_diff_gradient(model, sample, np.array([0.0]), h=1e-5)
        np.testing.assert_allclose(got, [-0.5], atol=1e-8)

    def test_zero_step_rejected(self):
        model = LossModel("ridge", lam=0.1)
        sample = LabeledSample(x=np.array([1.0]), y=1.0)
        with pytest.raises(ValueError):
            finite_diff_gradient(model, sample, np.array([0.0]), h=0.0)


class TestBruteForce:
    def _dataset(self, n=12, seed=3):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, 1))
        y = 0.6 * X[:, 0] + 0.1 * rng.standard_normal(n)
        return DataSet(X, y)

    def test_single_component_finds_least_squares(self):
        ds = self._dataset()
        model = LossModel("ridge", lam=0.0)
        grid = GridSpec(-2.0, 2.0, 401)
        best = brute_force_minimize(ds, model, SoftMinConfig(beta=1.0), 1, grid)
        closed = float(np.sum(ds.X[:, 0] * ds.y) / np.sum(ds.X[:, 0] ** 2))
        axis = grid.axis()
        nearest = axis[np.argmin(np.abs(axis - closed))]
        assert best.theta(0)[0] == pytest.approx(nearest)

    def test_symmetric_instance_beats_truth_gridpoint(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((16, 1))
        z = rng.integers(2, size=16)
        truth = np.array([[1.0], [-1.0]])
        y = np.take(truth[:, 0], z) * X[:, 0]
        ds = DataSet(X, y)
        model = LossModel("ridge", lam=1e-3)
        cfg = SoftMinConfig(beta=math.inf)
        # 41-point grid over [-2, 2] contains +-1 exactly
        best = brute_force_minimize(ds, model, cfg, 2, GridSpec(-2.0, 2.0, 41))
        assert empirical_loss(best, ds, model, cfg) <= empirical_loss(
            ParamSet(truth), ds, model, cfg
        )

    def test_matches_assignment_enumeration_oracle(self):
        # at beta=inf the optimum is the best over all label assignments of
        # the per-cluster ridge closed forms
        rng = np.random.default_rng(11)
        X = rng.standard_normal((5, 1))
        y = np.where(X[:, 0] > 0, 1.2 * X[:, 0], -0.8 * X[:, 0])
        ds = DataSet(X, y)
        lam = 1e-3
        model = LossModel("ridge", lam=lam)
        cfg = SoftMinConfig(beta=math.inf)
        grid = GridSpec(-2.0, 2.0, 201)
        best = brute_force_minimize(ds, model, cfg, 2, grid)
        bf_loss = empirical_loss(best, ds, model, cfg)

        enum_best = math.inf
        for assign in itertools.product([0, 1], repeat=5):
            assign = np.asarray(assign)
            total = 0.0
            for j in (0, 1):
                mask = assign == j
                if not np.any(mask):
                    continue
                xs, ys = ds.X[mask, 0], ds.y[mask]
                theta = float(np.sum(xs * ys) / (np.sum(xs * xs) + mask.sum() * lam))
                total += float(np.sum((ys - xs * theta) ** 2) + mask.sum() * lam * theta ** 2)
            enum_best = min(enum_best, total / 5.0)
        cell = 4.0 / 200
        # grid resolution slack: the loss is locally quadratic in theta
        assert bf_loss == pytest.approx(enum_best, abs=5.0 * cell ** 2 + 1e-9)
        assert bf_loss >= enum_best - 1e-12

    def test_budget_and_dimension_guards(self):
        ds = self._dataset()
        model = LossModel("ridge", lam=0.1)
        cfg = SoftMinConfig(beta=1.0)
        with pytest.raises(ValueError):
            brute_force_minimize(ds, model, cfg, 2, GridSpec(-1.0, 1.0, 4000))
        wide = DataSet(np.zeros((3, 3)), np.zeros(3))
        with pytest.raises(ValueError):
            brute_force_minimize(wide, model, cfg, 1, GridSpec(-1.0, 1.0, 3))


class TestLemmaSweeps:
    def test_reference_params_zero_violations(self, mlr_instance):
        ds, ref, model = mlr_instance
        rep1, rep2 = check_lemma_bounds(ds, ref, model, beta=5.0, c_ini=1e-12, trials=5, seed=0)
        assert not rep1.bound_vacuous and not rep2.bound_vacuous
        assert rep1.violations == 0 and rep2.violations == 0
        assert rep1.checked >= 5 * ds.n * 0.9

    def test_perturbed_params_zero_violations(self, mlr_instance):
        ds, ref, model = mlr_instance
        rep1, rep2 = check_lemma_bounds(ds, ref, model, beta=5.0, c_ini=0.01, trials=30, seed=1)
        assert rep1.violations == 0 and rep2.violations == 0
        assert rep1.checked + rep2.checked >= 10_000

    def test_beta_zero_exact_equality(self, mlr_instance):
        ds, ref, model = mlr_instance
        rep1, _ = check_lemma_bounds(ds, ref, model, beta=0.0, c_ini=0.01, trials=3, seed=2)
        # the own-region bound collapses to p >= 1/k, met with equality by
        # uniform weights
        assert not rep1.bound_vacuous
        assert rep1.violations == 0
        assert abs(rep1.worst_margin) <= 1e-12

    @pytest.mark.filterwarnings("ignore:separation delta")
    def test_vacuous_regime_flagged_not_counted(self):
        # overlapping noisy components with a huge beta: the eta numerator
        # underflows to zero, so the bound is vacuous
        rng = np.random.default_rng(3)
        X = rng.standard_normal((60, 2))
        y = X[:, 0] + 0.5 * rng.standard_normal(60)
        ds = DataSet(X, y)
        ref = ParamSet([[1.0, 0.1], [0.9, -0.1]])
        model = certify(LossModel("ridge", lam=1e-3), ds)
        rep1, _ = check_lemma_bounds(ds, ref, model, beta=1e5, c_ini=0.1, trials=2, seed=0)
        assert rep1.bound_vacuous
        assert rep1.violations == 0


class TestStepDecomposition:
    def _em(self, step_size, beta=5.0):
        return EMConfig(
            step_size=step_size, iterations=1, softmin=SoftMinConfig(beta=beta), resample=False
        )

    def test_single_component_has_no_cross_term(self, tiny_ridge):
        ds, model = tiny_ridge
        params = ParamSet([[0.3]])
        dec = step_decomposition(params, ds, model, self._em(0.1), ParamSet([[0.8]]))
        assert dec.T2 == 0.0
        assert dec.total <= dec.T1 + dec.T2 + 1e-12

    def test_zero_step_reduces_to_distance(self, mlr_instance):
        ds, ref, model = mlr_instance
        params = ParamSet(ref.thetas + [[0.2, 0.0], [0.0, -0.1]])
        dec = step_decomposition(params, ds, model, self._em(0.0), ref)
        assert dec.T1 == pytest.approx(0.2, rel=1e-12)
        assert dec.T2 == 0.0
        assert dec.total == pytest.approx(0.2, rel=1e-12)

    def test_triangle_inequality_on_random_instances(self, mlr_instance):
        ds, ref, model = mlr_instance
        rng = np.random.default_rng(7)
        gamma = 0.1
        for _ in range(25):
            params = ParamSet(ref.thetas + 0.2 * rng.standard_normal(ref.thetas.shape))
            dec = step_decomposition(params, ds, model, self._em(gamma), ref)
            assert dec.total <= dec.T1 + dec.T2 + 1e-12
