"""Gradient EM: fold partitioning, the simultaneous update, and full runs."""
import math

import numpy as np
import pytest

from softmix.data import DataSet, ParamSet
from softmix.em import (
    EMConfig,
    align_to_reference,
    fit_rate_and_floor,
    gradient_em_step,
    partition_dataset,
    run_gradient_em,
)
from softmix.losses import LossModel, batch_gradient, default_step_size
from softmix.softmin import SoftMinConfig


def _config(step_size=0.1, iterations=1, beta=2.0, resample=False, seed=0):
    return EMConfig(
        step_size=step_size,
        iterations=iterations,
        softmin=SoftMinConfig(beta=beta),
        resample=resample,
        seed=seed,
    )


class TestPartition:
    def _dataset(self, n):
        rng = np.random.default_rng(n)
        return DataSet(rng.standard_normal((n, 2)), rng.standard_normal(n))

    def test_even_split_covers_everything(self):
        ds = self._dataset(10)
        folds = partition_dataset(ds, 2, seed=0)
        assert [len(f) for f in folds] == [5, 5]
        seen = np.concatenate([f.y for f in folds])
        assert sorted(seen.tolist()) == sorted(ds.y.tolist())

    def test_surplus_discarded(self):
        ds = self._dataset(11)
        folds = partition_dataset(ds, 2, seed=3)
        assert [len(f) for f in folds] == [5, 5]

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            partition_dataset(self._dataset(3), 5, seed=0)

    def test_folds_disjoint(self):
        # y values are almost surely distinct under the generator, so they
        # identify samples across folds
        ds = self._dataset(97)
        folds = partition_dataset(ds, 7, seed=5)
        seen = np.concatenate([f.y for f in folds])
        assert len(np.unique(seen)) == len(seen) == 7 * (97 // 7)

    def test_seed_determinism(self):
        ds = self._dataset(30)
        a = partition_dataset(ds, 3, seed=9)
        b = partition_dataset(ds, 3, seed=9)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa.X, fb.X)
            np.testing.assert_array_equal(fa.y, fb.y)


class TestStep:
    def test_zero_step_size_is_identity(self):
        rng = np.random.default_rng(0)
        ds = DataSet(rng.standard_normal((6, 2)), rng.standard_normal(6))
        params = ParamSet(rng.standard_normal((2, 2)))
        out = gradient_em_step(params, ds, LossModel("ridge", lam=0.1), _config(step_size=0.0))
        assert out == params

    def test_input_params_unchanged(self):
        rng = np.random.default_rng(1)
        ds = DataSet(rng.standard_normal((6, 2)), rng.standard_normal(6))
        params = ParamSet(rng.standard_normal((2, 2)))
        before = params.thetas.copy()
        gradient_em_step(params, ds, LossModel("ridge", lam=0.1), _config())
        np.testing.assert_array_equal(params.thetas, before)

    def test_single_component_is_plain_gradient_step(self):
        rng = np.random.default_rng(2)
        ds = DataSet(rng.standard_normal((8, 3)), rng.standard_normal(8))
        model = LossModel("ridge", lam=0.05)
        theta = rng.standard_normal(3)
        gamma = 0.07
        out = gradient_em_step(ParamSet([theta]), ds, model, _config(step_size=gamma))
        want = theta - (gamma / len(ds)) * np.sum(
            batch_gradient(model, ds.X, ds.y, theta), axis=0
        )
        # bit-for-bit: the k=1 weights are exactly 1.0
        np.testing.assert_array_equal(out.theta(0), want)

    def test_two_component_hand_update(self):
        # n'=1, ridge lam=0, x=[1], y=1, beta=0: weights are 0.5 each,
        # gradients -2 and +2, so with gamma=1 both components land on [1]
        ds = DataSet(np.array([[1.0]]), np.array([1.0]))
        params = ParamSet([[0.0], [2.0]])
        out = gradient_em_step(
            params, ds, LossModel("ridge", lam=0.0), _config(step_size=1.0, beta=0.0)
        )
        np.testing.assert_allclose(out.thetas, [[1.0], [1.0]], atol=1e-15)

    def test_weights_frozen_at_incoming_params(self):
        # a sequential (Gauss-Seidel) update would give a different second
        # component here; the simultaneous one is equivariant instead
        rng = np.random.default_rng(4)
        ds = DataSet(rng.standard_normal((12, 2)), rng.standard_normal(12))
        model = LossModel("ridge", lam=0.01)
        params = ParamSet(rng.standard_normal((3, 2)))
        cfg = _config(step_size=0.2, beta=3.0)
        out = gradient_em_step(params, ds, model, cfg)
        perm = [2, 0, 1]
        out_perm = gradient_em_step(params.permuted(perm), ds, model, cfg)
        np.testing.assert_array_equal(out.permuted(perm).thetas, out_perm.thetas)

    def test_empty_fold_rejected(self):
        ds = DataSet(np.empty((0, 2)), np.empty(0))
        with pytest.raises(ValueError):
            gradient_em_step(ParamSet([[0.0, 0.0]]), ds, LossModel("ridge", lam=0.1), _config())


class TestAlignment:
    def test_permuted_copy_has_zero_distances(self):
        rng = np.random.default_rng(6)
        ref = ParamSet(rng.standard_normal((4, 3)))
        perm, dists = align_to_reference(ref.permuted([2, 3, 0, 1]), ref)
        np.testing.assert_array_equal(perm, [2, 3, 0, 1])
        np.testing.assert_allclose(dists, 0.0, atol=1e-15)

    def test_distances_indexed_by_reference(self):
        ref = ParamSet([[0.0, 0.0], [10.0, 0.0]])
        params = ParamSet([[10.0, 1.0], [0.5, 0.0]])
        perm, dists = align_to_reference(params, ref)
        np.testing.assert_array_equal(perm, [1, 0])
        np.testing.assert_allclose(dists, [0.5, 1.0], atol=1e-15)


class TestRateFit:
    def test_recovers_pure_geometric_rate(self):
        rate = 0.7
        seq = 1.0 * rate ** np.arange(30)
        fitted, floor = fit_rate_and_floor(seq)
        assert fitted == pytest.approx(rate, rel=1e-6)
        assert floor == pytest.approx(seq[-1])

    def test_plateau_excluded_from_fit(self):
        decay = 1.0 * 0.5 ** np.arange(15)
        seq = np.concatenate([decay, np.full(10, decay[-1])])
        fitted, _ = fit_rate_and_floor(seq)
        assert fitted == pytest.approx(0.5, rel=1e-6)

    def test_flat_sequence_has_no_rate(self):
        fitted, floor = fit_rate_and_floor(np.full(10, 0.3))
        assert fitted is None
        assert floor == pytest.approx(0.3)


class TestRun:
    def test_single_iteration_equals_one_step_on_fold_zero(self, tiny_ridge):
        ds, model = tiny_ridge
        init = ParamSet([[0.1]])
        cfg = _config(step_size=0.05, iterations=1, resample=True, seed=4)
        final, _ = run_gradient_em(init, ds, model, cfg)
        fold0 = partition_dataset(ds, 1, seed=4)[0]
        want = gradient_em_step(init, fold0, model, cfg)
        np.testing.assert_array_equal(final.thetas, want.thetas)

    def test_k1_matches_plain_gradient_descent_bitwise(self, tiny_ridge):
        ds, model = tiny_ridge
        gamma = default_step_size(model, ds)
        init = ParamSet([[0.0]])
        cfg = _config(step_size=gamma, iterations=50, resample=False)
        final, _ = run_gradient_em(init, ds, model, cfg)
        theta = init.theta(0).copy()
        for _ in range(50):
            theta = theta - (gamma / ds.n) * np.sum(
                batch_gradient(model, ds.X, ds.y, theta), axis=0
            )
        np.testing.assert_array_equal(final.theta(0), theta)

    def test_determinism(self, mlr_instance):
        ds, ref, model = mlr_instance
        init = ParamSet(ref.thetas + 0.1)
        cfg = _config(step_size=0.1, iterations=5, beta=5.0, resample=True, seed=13)
        a, _ = run_gradient_em(init, ds, model, cfg, reference=ref)
        b, _ = run_gradient_em(init, ds, model, cfg, reference=ref)
        np.testing.assert_array_equal(a.thetas, b.thetas)

    def test_component_relabeling_equivariance(self, mlr_instance):
        ds, ref, model = mlr_instance
        init = ParamSet(ref.thetas + [[0.1, -0.05], [0.02, 0.08]])
        cfg = _config(step_size=0.1, iterations=4, beta=5.0, resample=False)
        a, _ = run_gradient_em(init, ds, model, cfg)
        b, _ = run_gradient_em(init.permuted([1, 0]), ds, model, cfg)
        np.testing.assert_array_equal(a.permuted([1, 0]).thetas, b.thetas)

    def test_fixed_point_at_reference_on_noiseless_data(self, mlr_instance):
        ds, ref, model = mlr_instance
        gamma = default_step_size(model, ds)
        cfg = _config(step_size=gamma, iterations=10, beta=10.0, resample=False)
        _, trace = run_gradient_em(ref.copy(), ds, model, cfg, reference=ref)
        # the regularizer keeps truth from being an exact stationary point,
        # so distances stay at a gamma * epsilon1 scale, not exactly zero
        assert float(np.max(trace.max_distances())) <= 1e-2

    def test_distance_nonincreasing_until_floor(self, mlr_instance):
        ds, ref, model = mlr_instance
        gamma = default_step_size(model, ds)
        rng = np.random.default_rng(21)
        offsets = rng.standard_normal(ref.thetas.shape)
        offsets /= np.linalg.norm(offsets, axis=1, keepdims=True)
        init = ParamSet(ref.thetas + 0.2 * offsets)
        cfg = _config(step_size=gamma, iterations=25, beta=10.0, resample=False)
        _, trace = run_gradient_em(init, ds, model, cfg, reference=ref)
        md = trace.max_distances()
        floor = trace.fitted_floor
        for t in range(1, len(md) - 1):
            if md[t] <= 2.0 * floor:
                break
            assert md[t + 1] <= md[t] + 1e-9
        assert trace.fitted_rate is not None and trace.fitted_rate < 1.0

    def test_trace_shape_and_loss_column(self, mlr_instance):
        ds, ref, model = mlr_instance
        cfg = _config(step_size=0.05, iterations=6, beta=5.0, resample=True, seed=2)
        _, trace = run_gradient_em(ParamSet(ref.thetas + 0.1), ds, model, cfg, reference=ref)
        assert len(trace.records) == 7
        assert all(r.distances.shape == (2,) for r in trace.records)
        assert all(math.isfinite(r.loss) for r in trace.records)

    def test_resample_needs_enough_samples(self):
        rng = np.random.default_rng(0)
        ds = DataSet(rng.standard_normal((4, 1)), rng.standard_normal(4))
        cfg = _config(iterations=10, resample=True)
        with pytest.raises(ValueError):
            run_gradient_em(ParamSet([[0.0]]), ds, LossModel("ridge", lam=0.1), cfg)
