"""Tests for alignment ascent: parameter init, gradients, the training loop."""
import math

import numpy as np
import pytest

from qekbench import training
from qekbench.circuit import AnsatzSpec
from qekbench.kernel import DegenerateKernelError
from qekbench.training import (
    AlignmentTrace,
    TraceRow,
    TrainConfig,
    batch_alignment,
    fd_gradient,
    init_params,
    train,
)


def toy_problem(rng, n_train=6, n_test=4, n_qubits=2):
    """Two fuzzy corners of the unit square, labelled 0 and 1."""
    half_tr, half_te = n_train // 2, n_test // 2
    lo = rng.uniform(0.0, 0.35, size=(half_tr + half_te, n_qubits))
    hi = rng.uniform(0.65, 1.0, size=(half_tr + half_te, n_qubits))
    x_train = np.vstack([lo[:half_tr], hi[:half_tr]])
    y_train = np.array([0] * half_tr + [1] * half_tr)
    x_test = np.vstack([lo[half_tr:], hi[half_tr:]])
    y_test = np.array([0] * half_te + [1] * half_te)
    return (x_train, y_train), (x_test, y_test)


class TestInitParams:
    def test_length_range_and_determinism(self):
        spec = AnsatzSpec("data-weaved", n_qubits=3, n_layers=4)
        params = init_params(spec, seed=11)
        assert params.shape == (spec.n_params,) == (24,)
        assert np.all(params >= 0.0)
        assert np.all(params < 2.0 * np.pi)
        assert np.array_equal(params, init_params(spec, seed=11))
        assert not np.array_equal(params, init_params(spec, seed=12))

    def test_wider_spec_extends_narrower_one(self):
        # Sequential draws: the deep vector starts with the shallow vector.
        shallow = init_params(AnsatzSpec("data-first", 3, 1), seed=5)
        deep = init_params(AnsatzSpec("data-first", 3, 4), seed=5)
        assert np.array_equal(deep[: len(shallow)], shallow)


class TestTrainConfig:
    def test_rejects_bad_values(self):
        spec = AnsatzSpec("data-last", 2, 1)
        with pytest.raises(ValueError, match="iterations"):
            TrainConfig(spec, iterations=-1)
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig(spec, batch_size=1)
        with pytest.raises(ValueError, match="checkpoint_every"):
            TrainConfig(spec, checkpoint_every=0)
        with pytest.raises(ValueError, match="learning_rate"):
            TrainConfig(spec, learning_rate=0.0)
        with pytest.raises(ValueError, match="fd_epsilon"):
            TrainConfig(spec, fd_epsilon=0.0)

    def test_zero_iterations_is_allowed(self):
        TrainConfig(AnsatzSpec("data-last", 2, 1), iterations=0)


class TestBatchAlignment:
    def test_identical_points_single_label_align_perfectly(self):
        spec = AnsatzSpec("data-weaved", 2, 1)
        params = init_params(spec, seed=0)
        features = np.tile([0.3, 0.7], (3, 1))
        value = batch_alignment(spec, params, features, [1, 1, 1])
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_single_class_batch_is_positive(self, rng):
        spec = AnsatzSpec("data-last", 2, 1)
        params = init_params(spec, seed=3)
        features = rng.uniform(size=(4, 2))
        assert batch_alignment(spec, params, features, [0, 0, 0, 0]) > 0.0

    def test_rejects_tiny_batch(self):
        spec = AnsatzSpec("data-last", 2, 1)
        with pytest.raises(ValueError, match="at least 2"):
            batch_alignment(spec, init_params(spec, 0), np.ones((1, 2)), [0])


class TestFdGradient:
    def test_stable_under_epsilon_refinement(self, rng):
        # Central differences are O(eps^2): shrinking eps 100x must agree
        # to far better than either truncation error alone.
        spec = AnsatzSpec("data-weaved", 2, 1)
        params = init_params(spec, seed=4)
        features = rng.uniform(size=(4, 2))
        labels = [0, 0, 1, 1]
        coarse = fd_gradient(spec, params, features, labels, epsilon=1e-3)
        fine = fd_gradient(spec, params, features, labels, epsilon=1e-5)
        assert np.max(np.abs(coarse - fine)) < 1e-4

    def test_data_first_single_layer_gradient_vanishes(self, rng):
        # The trailing parametric layer cancels against its own adjoint in
        # the kernel, so with one layer nothing depends on the parameters.
        spec = AnsatzSpec("data-first", 3, 1)
        params = init_params(spec, seed=8)
        features = rng.uniform(size=(5, 3))
        labels = [0, 1, 0, 1, 0]
        grad = fd_gradient(spec, params, features, labels, epsilon=1e-3)
        assert np.max(np.abs(grad)) < 1e-8

    def test_small_step_along_gradient_does_not_decrease_alignment(self, rng):
        cases = 0
        while cases < 20:
            arch = ("data-weaved", "data-last")[cases % 2]
            spec = AnsatzSpec(arch, 2, 1)
            params = rng.uniform(0.0, 2.0 * np.pi, spec.n_params)
            features = rng.uniform(size=(4, 2))
            labels = rng.integers(0, 2, size=4)
            if len(np.unique(labels)) < 2:
                continue
            grad = fd_gradient(spec, params, features, labels)
            before = batch_alignment(spec, params, features, labels)
            after = batch_alignment(spec, params + 0.05 * grad, features, labels)
            assert after >= before - 1e-6
            cases += 1

    def test_rejects_bad_epsilon(self):
        spec = AnsatzSpec("data-last", 2, 1)
        with pytest.raises(ValueError, match="epsilon"):
            fd_gradient(spec, init_params(spec, 0), np.ones((2, 2)), [0, 1], epsilon=0.0)


class TestTrain:
    def make_config(self, **overrides):
        base = dict(
            spec=AnsatzSpec("data-weaved", 2, 1),
            iterations=7,
            batch_size=3,
            checkpoint_every=3,
            learning_rate=0.2,
            init_seed=21,
            batch_seed=22,
        )
        base.update(overrides)
        return TrainConfig(**base)

    def test_checkpoint_schedule(self, rng):
        train_set, test_set = toy_problem(rng)
        _, trace = train(self.make_config(), train_set, test_set)
        assert [r.iteration for r in trace.rows] == [0, 3, 6, 7]
        elapsed = [r.elapsed_seconds for r in trace.rows]
        assert elapsed == sorted(elapsed)
        assert trace.final.iteration == 7

    def test_zero_iterations_trace_is_initial_checkpoint_only(self, rng):
        train_set, test_set = toy_problem(rng)
        params, trace = train(self.make_config(iterations=0), train_set, test_set)
        assert [r.iteration for r in trace.rows] == [0]
        assert np.array_equal(params, init_params(self.make_config().spec, 21))

    def test_deterministic_apart_from_timing(self, rng):
        train_set, test_set = toy_problem(rng)
        config = self.make_config(iterations=4, checkpoint_every=2)
        params_a, trace_a = train(config, train_set, test_set)
        params_b, trace_b = train(config, train_set, test_set)
        assert np.array_equal(params_a, params_b)
        for ra, rb in zip(trace_a.rows, trace_b.rows):
            assert ra.iteration == rb.iteration
            assert ra.alignment == rb.alignment
            assert ra.test_accuracy == rb.test_accuracy

    def test_batch_seed_changes_the_path(self, rng):
        train_set, test_set = toy_problem(rng)
        params_a, _ = train(self.make_config(iterations=3), train_set, test_set)
        params_b, _ = train(
            self.make_config(iterations=3, batch_seed=99), train_set, test_set
        )
        assert not np.array_equal(params_a, params_b)

    def test_degenerate_checkpoint_records_nan_and_training_continues(
        self, rng, monkeypatch
    ):
        train_set, test_set = toy_problem(rng)
        n_train = len(train_set[0])
        real = training.target_alignment

        def flaky(gram, labels):
            # Fail only for full-training-set grams; batch grams stay real
            # so the gradient path is untouched.
            if gram.shape[0] == n_train:
                raise DegenerateKernelError("forced")
            return real(gram, labels)

        monkeypatch.setattr(training, "target_alignment", flaky)
        params, trace = train(self.make_config(iterations=3), train_set, test_set)
        assert np.all(np.isfinite(params))
        assert all(math.isnan(r.alignment) for r in trace.rows)
        assert all(math.isfinite(r.test_accuracy) for r in trace.rows)

    def test_failed_accuracy_records_nan_but_keeps_alignment(self, rng, monkeypatch):
        train_set, test_set = toy_problem(rng)

        def broken(*args, **kwargs):
            raise ValueError("forced")

        monkeypatch.setattr(training, "fit_ovr", broken)
        _, trace = train(self.make_config(iterations=2), train_set, test_set)
        assert all(math.isnan(r.test_accuracy) for r in trace.rows)
        assert all(math.isfinite(r.alignment) for r in trace.rows)

    def test_rejects_mismatched_widths_and_oversized_batch(self, rng):
        train_set, test_set = toy_problem(rng)
        bad_train = (np.ones((6, 3)), train_set[1])
        with pytest.raises(ValueError, match="train features"):
            train(self.make_config(), bad_train, test_set)
        bad_test = (np.ones((4, 3)), test_set[1])
        with pytest.raises(ValueError, match="test features"):
            train(self.make_config(), train_set, bad_test)
        with pytest.raises(ValueError, match="batch_size"):
            train(self.make_config(batch_size=7), train_set, test_set)


class TestTraceIo:
    def test_roundtrip_preserves_values_including_nan(self, tmp_path):
        trace = AlignmentTrace(
            [
                TraceRow(0, 0.512345678901234, 0.75, 0.01),
                TraceRow(250, math.nan, math.nan, 1.5),
                TraceRow(500, 0.6123, 1.0, 3.25),
            ]
        )
        path = tmp_path / "trace.csv"
        trace.save(path)
        loaded = AlignmentTrace.load(path)
        assert len(loaded.rows) == 3
        for orig, back in zip(trace.rows, loaded.rows):
            assert back.iteration == orig.iteration
            for name in ("alignment", "test_accuracy", "elapsed_seconds"):
                a, b = getattr(orig, name), getattr(back, name)
                assert (math.isnan(a) and math.isnan(b)) or a == b

    def test_rejects_unexpected_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("iteration,alignment\n0,0.5\n")
        with pytest.raises(ValueError, match="header"):
            AlignmentTrace.load(path)
