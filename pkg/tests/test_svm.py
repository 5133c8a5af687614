"""Tests for the precomputed-kernel SVM: SMO solver, OvR wrapper, metrics.

The reference point for optimality is the projected-gradient solver in
qp_oracle.py, so that file's own checks come first.
"""
import numpy as np
import pytest

from qekbench import svm
from qp_oracle import project_box_hyperplane, solve_qp_reference


def random_psd_kernel(rng, n):
    feats = rng.normal(size=(n, n + 2))
    gram = feats @ feats.T
    return gram / np.abs(gram).max()


def random_balanced_labels(rng, n):
    y = rng.choice([-1.0, 1.0], size=n)
    if len(np.unique(y)) < 2:
        y[0] = -y[0]
    return y


def two_cluster_problem(rng, per_side=4, gap=4.0):
    """Linearly separable blobs and their linear-kernel Gram matrix."""
    x = np.vstack(
        [
            rng.normal(size=(per_side, 2)) + [gap, 0.0],
            rng.normal(size=(per_side, 2)) - [gap, 0.0],
        ]
    )
    y = np.array([1.0] * per_side + [-1.0] * per_side)
    return x, y, x @ x.T


# ---------------------------------------------------------------------------
# the oracle itself


class TestQpOracle:
    def test_projection_is_feasible(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 9))
            y = random_balanced_labels(rng, n)
            c = float(rng.uniform(0.2, 3.0))
            p = project_box_hyperplane(rng.normal(size=n) * 3.0, y, c)
            assert np.all(p >= -1e-12)
            assert np.all(p <= c + 1e-12)
            assert abs(y @ p) < 1e-10

    def test_projection_is_closest_feasible_point(self, rng):
        # Against sampled feasible points: no sample may be strictly closer.
        for _ in range(50):
            n = int(rng.integers(2, 8))
            y = random_balanced_labels(rng, n)
            c = float(rng.uniform(0.5, 2.0))
            v = rng.normal(size=n) * 3.0
            dist = np.linalg.norm(project_box_hyperplane(v, y, c) - v)
            for _ in range(20):
                other = project_box_hyperplane(rng.normal(size=n) * 3.0, y, c)
                assert dist <= np.linalg.norm(other - v) + 1e-9

    def test_oracle_solves_two_point_problem_exactly(self):
        gram = np.eye(2)
        y = np.array([1.0, -1.0])
        # max a1 + a2 - (a1^2 + a2^2)/2 with a1 = a2: unconstrained optimum 1.
        np.testing.assert_allclose(solve_qp_reference(gram, y, C=1.0), [1.0, 1.0], atol=1e-9)
        # C = 0.3 moves the optimum onto the box boundary.
        np.testing.assert_allclose(solve_qp_reference(gram, y, C=0.3), [0.3, 0.3], atol=1e-9)


# ---------------------------------------------------------------------------
# binary solver


class TestSolveDual:
    def test_matches_two_point_closed_form(self):
        gram = np.eye(2)
        y = np.array([1.0, -1.0])
        model = svm.solve_dual(gram, y, C=1.0)
        np.testing.assert_allclose(model.alphas, [1.0, 1.0], atol=1e-12)
        assert model.bias == pytest.approx(0.0, abs=1e-12)
        assert model.converged
        # Both training points land on the correct side; the first one at
        # exactly f = 1*K11 - 1*K12 + b = 1.
        decisions = svm.decision_values(model, gram)
        assert decisions[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.sign(decisions) == y)

    def test_six_point_objective_matches_oracle(self):
        rng = np.random.default_rng(99)
        gram = random_psd_kernel(rng, 6)
        y = np.array([1.0, 1.0, -1.0, 1.0, -1.0, -1.0])
        model = svm.solve_dual(gram, y, C=1.0, tol=1e-8, max_passes=5000)
        ref = solve_qp_reference(gram, y, C=1.0)
        ours = svm.dual_objective(model.alphas, gram, y)
        best = svm.dual_objective(ref, gram, y)
        assert abs(ours - best) < 1e-6

    def test_objective_matches_oracle_on_random_instances(self, rng):
        for _ in range(25):
            n = int(rng.integers(3, 9))
            gram = random_psd_kernel(rng, n)
            y = random_balanced_labels(rng, n)
            c = float(rng.choice([0.5, 1.0, 10.0]))
            model = svm.solve_dual(gram, y, c, tol=1e-8, max_passes=5000)
            ref = solve_qp_reference(gram, y, c)
            ours = svm.dual_objective(model.alphas, gram, y)
            best = svm.dual_objective(ref, gram, y)
            assert abs(ours - best) / max(1.0, abs(best)) < 1e-5

    def test_solution_is_dual_feasible(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 12))
            gram = random_psd_kernel(rng, n)
            y = random_balanced_labels(rng, n)
            c = float(rng.uniform(0.3, 5.0))
            model = svm.solve_dual(gram, y, c)
            assert np.all(model.alphas >= 0.0)
            assert np.all(model.alphas <= c)
            assert abs(model.alphas @ y) < 1e-10

    def test_kkt_conditions_hold_within_tolerance(self, rng):
        tol = 1e-3
        for _ in range(10):
            n = int(rng.integers(4, 10))
            gram = random_psd_kernel(rng, n)
            y = random_balanced_labels(rng, n)
            model = svm.solve_dual(gram, y, C=1.0, tol=tol, max_passes=5000)
            assert model.converged
            margins = y * svm.decision_values(model, gram)
            free = (model.alphas > 1e-8) & (model.alphas < 1.0 - 1e-8)
            at_zero = model.alphas <= 1e-8
            at_cap = model.alphas >= 1.0 - 1e-8
            assert np.all(margins[free] == pytest.approx(1.0, abs=2 * tol))
            assert np.all(margins[at_zero] >= 1.0 - 2 * tol)
            assert np.all(margins[at_cap] <= 1.0 + 2 * tol)

    def test_capped_alpha_on_correct_side_has_matching_sign(self):
        # In the symmetric 2-point problem both alphas sit at C and both
        # points are classified correctly.
        model = svm.solve_dual(np.eye(2), np.array([1.0, -1.0]), C=1.0)
        assert np.all(model.alphas == pytest.approx(1.0))
        decisions = svm.decision_values(model, np.eye(2))
        assert np.sign(decisions[0]) == 1.0
        assert np.sign(decisions[1]) == -1.0

    def test_duplicated_points_leave_decision_values_unchanged(self, rng):
        x, y, gram = two_cluster_problem(rng)
        model = svm.solve_dual(gram, y, C=10.0, tol=1e-8, max_passes=5000)
        # C=10 keeps the box inactive, so splitting mass across copies is a
        # pure dual degeneracy and the decision function cannot move.
        assert np.all(model.alphas < 10.0 - 1e-6)
        x2 = np.vstack([x, x])
        y2 = np.concatenate([y, y])
        doubled = svm.solve_dual(x2 @ x2.T, y2, C=10.0, tol=1e-8, max_passes=5000)
        queries = rng.normal(size=(8, 2)) * 3.0
        base = svm.decision_values(model, queries @ x.T)
        dup = svm.decision_values(doubled, queries @ x2.T)
        np.testing.assert_allclose(dup, base, atol=1e-6)

    def test_permuting_training_points_permutes_alphas(self, rng):
        for _ in range(5):
            n = int(rng.integers(5, 10))
            gram = random_psd_kernel(rng, n)
            y = random_balanced_labels(rng, n)
            model = svm.solve_dual(gram, y, C=1.0, tol=1e-8, max_passes=5000)
            perm = rng.permutation(n)
            permuted = svm.solve_dual(gram[np.ix_(perm, perm)], y[perm], C=1.0, tol=1e-8, max_passes=5000)
            np.testing.assert_allclose(permuted.alphas, model.alphas[perm], atol=1e-8)
            rows = random_psd_kernel(rng, n)[:3]
            base = svm.decision_values(model, rows)
            same = svm.decision_values(permuted, rows[:, perm])
            np.testing.assert_allclose(same, base, atol=1e-8)

    def test_kernel_scaling_with_inverse_c_keeps_labels(self, rng):
        x, y, gram = two_cluster_problem(rng)
        scale = 7.5
        model = svm.solve_dual(gram, y, C=1.0, tol=1e-8, max_passes=5000)
        scaled = svm.solve_dual(scale * gram, y, C=1.0 / scale, tol=1e-8, max_passes=5000)
        queries = rng.normal(size=(12, 2)) * 4.0
        rows = queries @ x.T
        signs = np.sign(svm.decision_values(model, rows))
        assert np.array_equal(np.sign(svm.decision_values(scaled, scale * rows)), signs)

    def test_warns_on_non_psd_kernel(self):
        gram = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.warns(UserWarning, match="not PSD"):
            svm.solve_dual(gram, np.array([1.0, -1.0]), C=1.0)

    def test_rejects_bad_problems(self):
        eye = np.eye(2)
        pm = np.array([1.0, -1.0])
        with pytest.raises(ValueError, match="single class"):
            svm.solve_dual(eye, np.array([1.0, 1.0]), C=1.0)
        with pytest.raises(ValueError, match="square"):
            svm.solve_dual(np.ones((2, 3)), pm, C=1.0)
        with pytest.raises(ValueError):
            svm.solve_dual(eye, np.array([1.0, -1.0, 1.0]), C=1.0)
        with pytest.raises(ValueError, match=r"\+-1"):
            svm.solve_dual(eye, np.array([1.0, 0.0]), C=1.0)
        with pytest.raises(ValueError, match="C must be"):
            svm.solve_dual(eye, pm, C=0.0)


class TestDecisionValues:
    def test_zero_alphas_return_bias(self):
        model = svm.BinarySvmModel(
            alphas=np.zeros(3), bias=0.25, labels=np.array([1.0, -1.0, 1.0]), C=1.0
        )
        np.testing.assert_allclose(svm.decision_values(model, np.ones((4, 3))), 0.25)

    def test_rejects_wrong_row_length(self):
        model = svm.BinarySvmModel(
            alphas=np.zeros(3), bias=0.0, labels=np.array([1.0, -1.0, 1.0]), C=1.0
        )
        with pytest.raises(ValueError, match="columns"):
            svm.decision_values(model, np.ones((2, 4)))


# ---------------------------------------------------------------------------
# one-vs-rest


class TestOvr:
    def test_two_class_decisions_negate_each_other(self, rng):
        x, y, gram = two_cluster_problem(rng)
        labels = (y < 0).astype(int)  # class 0 on the +x side, class 1 opposite
        model = svm.fit_ovr(gram, labels, C=1.0, tol=1e-8, max_passes=5000)
        assert [cid for cid, _ in model.members] == [0, 1]
        d0 = svm.decision_values(model.members[0][1], gram)
        d1 = svm.decision_values(model.members[1][1], gram)
        np.testing.assert_allclose(d0 + d1, 0.0, atol=1e-6)

    def test_three_class_model_count_and_order(self, rng):
        gram = random_psd_kernel(rng, 9)
        labels = np.array([2, 0, 1, 2, 0, 1, 2, 0, 1])
        model = svm.fit_ovr(gram, labels, C=1.0)
        assert [cid for cid, _ in model.members] == [0, 1, 2]

    def test_separable_clusters_reach_full_accuracy(self, rng):
        centers = np.array([[6.0, 0.0], [-6.0, 0.0], [0.0, 6.0]])
        x = np.vstack([rng.normal(size=(5, 2)) * 0.5 + c for c in centers])
        labels = np.repeat([0, 1, 2], 5)
        gram = x @ x.T
        model = svm.fit_ovr(gram, labels, C=10.0)
        predicted = svm.predict(model, gram)
        assert svm.accuracy(predicted, labels) == 1.0

    def test_all_equal_decision_values_pick_smallest_class(self):
        flat = svm.BinarySvmModel(
            alphas=np.zeros(2), bias=0.0, labels=np.array([1.0, -1.0]), C=1.0
        )
        model = svm.OvrModel(members=[(3, flat), (7, flat)])
        assert list(svm.predict(model, np.ones((2, 2)))) == [3, 3]

    def test_single_class_is_rejected(self):
        with pytest.raises(ValueError, match="2 classes"):
            svm.fit_ovr(np.eye(3), np.array([1, 1, 1]), C=1.0)


class TestAccuracy:
    def test_exact_match_fraction(self):
        assert svm.accuracy(np.array([0, 1, 0]), np.array([0, 1, 0])) == 1.0
        assert svm.accuracy(np.array([1, 0]), np.array([0, 1])) == 0.0
        assert svm.accuracy(np.array([0, 1, 0]), np.array([0, 1, 1])) == pytest.approx(2 / 3)

    def test_rejects_empty_and_mismatched(self):
        with pytest.raises(ValueError, match="empty"):
            svm.accuracy(np.array([]), np.array([]))
        with pytest.raises(ValueError, match="shape"):
            svm.accuracy(np.array([1, 2]), np.array([1]))
