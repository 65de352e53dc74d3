import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_feasible_pair, random_observable_system
from oracles import kron_feature
from trajclass import modelbased
from trajclass.modelbased import ABSTAIN, ModelBasedClassifier
from trajclass.sysmodel import InfeasiblePairError, LinearSystem, observability_matrix
from trajclass.trajectories import ZeroTrajectoryError

SYS_P = LinearSystem(1.0, 1.0)
SYS_M = LinearSystem(-1.0, 1.0)


@pytest.fixture(scope="module")
def scalar_clf():
    return modelbased.build(SYS_P, SYS_M, 2)


class TestBuild:
    def test_scalar_pair_projection_difference(self, scalar_clf):
        assert np.allclose(scalar_clf.Q, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)
        assert np.allclose(scalar_clf.Q1, 0.5 * np.ones((2, 2)), atol=1e-12)
        assert np.allclose(scalar_clf.Q2, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)

    def test_infeasible_pair_rejected(self):
        with pytest.raises(InfeasiblePairError):
            modelbased.build(SYS_P, SYS_P, 4)

    def test_coordinate_subspace(self):
        # First observability range = span(e1) gives a diagonal projection.
        sys1 = LinearSystem(0.0, 1.0)  # O = [1; 0; 0] at N=3
        sys2 = LinearSystem(1.0, 1.0)
        clf = modelbased.build(sys1, sys2, 3)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        assert np.allclose(clf.Q1, expected, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_projection_invariants(self, seed):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng)
        clf = modelbased.build(sys1, sys2, N)
        for Q, n in ((clf.Q1, sys1.n), (clf.Q2, sys2.n)):
            assert np.allclose(Q, Q.T, atol=1e-8)
            assert np.allclose(Q @ Q, Q, atol=1e-8)
            assert abs(np.trace(Q) - n) <= 1e-8
        assert abs(np.trace(clf.Q) - (sys1.n - sys2.n)) <= 1e-8
        assert np.array_equal(clf.wM, clf.Q.reshape(-1, order="F"))
        fro2 = np.linalg.norm(clf.Q, "fro") ** 2
        assert fro2 <= 2 * (sys1.n + sys2.n) + 1e-8

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_gramian_route_agrees(self, seed):
        # Q_i also equals O (O'O)^(-1) O' on well-conditioned instances.
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng, n_max=3, min_margin=1e-3)
        clf = modelbased.build(sys1, sys2, N)
        O1 = observability_matrix(sys1, N).O
        G1 = O1.T @ O1
        assert np.allclose(clf.Q1, O1 @ np.linalg.solve(G1, O1.T), atol=1e-8)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_swap_negates_exactly(self, seed):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng)
        forward = modelbased.build(sys1, sys2, N)
        backward = modelbased.build(sys2, sys1, N)
        assert np.array_equal(backward.Q, -forward.Q)


class TestResidualDistance:
    def test_in_subspace_is_zero(self, scalar_clf):
        assert modelbased.residual_distance(scalar_clf, [2.0, 2.0], 1) <= 1e-9

    def test_distance_to_other_class(self, scalar_clf):
        assert np.isclose(modelbased.residual_distance(scalar_clf, [1.0, 1.0], 2), 2.0)

    def test_orthogonal_to_both_ranges(self):
        rng = np.random.default_rng(1)
        sys1 = random_observable_system(rng, 1)
        sys2 = random_observable_system(rng, 1)
        from trajclass.sysmodel import feasibility_check

        N = 4
        if not feasibility_check(sys1, sys2, N).feasible:
            pytest.skip("unlucky draw")
        clf = modelbased.build(sys1, sys2, N)
        # Build a vector orthogonal to both 1-D ranges.
        basis = np.hstack([clf.U1, clf.U2])
        q, _ = np.linalg.qr(np.hstack([basis, rng.normal(size=(N, N - 2))]))
        y = q[:, -1]
        assert np.isclose(modelbased.residual_distance(clf, y, 1), y @ y)
        assert np.isclose(modelbased.residual_distance(clf, y, 2), y @ y)

    def test_dimension_mismatch(self, scalar_clf):
        with pytest.raises(ValueError):
            modelbased.residual_distance(scalar_clf, [1.0, 2.0, 3.0], 1)

    def test_bad_class_index(self, scalar_clf):
        with pytest.raises(ValueError):
            modelbased.residual_distance(scalar_clf, [1.0, 1.0], 3)


class TestDecisionValue:
    def test_hand_values(self, scalar_clf):
        assert np.isclose(modelbased.decision_value(scalar_clf, [1.0, 1.0]), 2.0)
        assert np.isclose(modelbased.decision_value(scalar_clf, [1.0, -1.0]), -2.0)
        assert modelbased.decision_value(scalar_clf, [1.0, 0.0]) == pytest.approx(0.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_three_way_identity(self, seed):
        # quadratic form == distance gap == feature-space inner product
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng, n_max=3)
        clf = modelbased.build(sys1, sys2, N)
        y = rng.normal(size=N * sys1.m)
        v = modelbased.decision_value(clf, y)
        gap = modelbased.residual_distance(clf, y, 2) - modelbased.residual_distance(
            clf, y, 1
        )
        lifted = float(clf.wM @ kron_feature(y))
        scale = max(abs(v), 1e-12)
        assert abs(v - gap) <= 1e-9 * max(scale, y @ y)
        assert abs(v - lifted) <= 1e-9 * max(scale, y @ y)

    def test_batched_matches_scalar(self, scalar_clf):
        rng = np.random.default_rng(2)
        Ys = rng.normal(size=(7, 2))
        batch = modelbased.decision_values(scalar_clf, Ys)
        single = [modelbased.decision_value(scalar_clf, y) for y in Ys]
        assert np.allclose(batch, single)


class TestClassify:
    def test_own_class_signs(self, scalar_clf):
        assert modelbased.classify(scalar_clf, [3.0, 3.0]) == 1
        assert modelbased.classify(scalar_clf, [3.0, -3.0]) == -1

    def test_boundary_abstains(self, scalar_clf):
        assert modelbased.classify(scalar_clf, [1.0, 0.0]) == ABSTAIN

    def test_zero_rejected(self, scalar_clf):
        with pytest.raises(ZeroTrajectoryError):
            modelbased.classify(scalar_clf, [0.0, 0.0])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=10)
    def test_correct_on_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng, min_margin=1e-3)
        clf = modelbased.build(sys1, sys2, N)
        for sys, want in ((sys1, 1), (sys2, -1)):
            O = observability_matrix(sys, N).O
            X0 = rng.normal(size=(sys.n, 200))
            Ys = (O @ X0).T
            dec = modelbased.decision_values(clf, Ys)
            scale = np.einsum("ij,ij->i", Ys, Ys)
            nonzero = scale > 0
            assert np.all(np.sign(dec[nonzero]) == want)
            assert np.all(np.abs(dec[nonzero]) > 1e-10 * scale[nonzero])


class TestSupportVectorForm:
    def test_scalar_pair(self, scalar_clf):
        sv1, sv2 = modelbased.support_vector_form(scalar_clf)
        assert len(sv1) == 1 and len(sv2) == 1
        assert np.allclose(np.abs(sv1[0]), [1, 1] / np.sqrt(2))
        assert np.allclose(np.abs(sv2[0]), [1, 1] / np.sqrt(2))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng)
        clf = modelbased.build(sys1, sys2, N)
        sv1, sv2 = modelbased.support_vector_form(clf)
        assert len(sv1) == sys1.n and len(sv2) == sys2.n
        rebuilt = sum(kron_feature(y) for y in sv1) - sum(kron_feature(y) for y in sv2)
        assert np.linalg.norm(rebuilt - clf.wM) <= 1e-9


class TestRealizationInvariance:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=10)
    def test_weight_vector_unchanged(self, seed):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng, n_max=3)
        clf = modelbased.build(sys1, sys2, N)
        transformed = []
        for sys in (sys1, sys2):
            # Random change of coordinates with condition number <= 100.
            u = np.linalg.qr(rng.normal(size=(sys.n, sys.n)))[0]
            v = np.linalg.qr(rng.normal(size=(sys.n, sys.n)))[0]
            T = u @ np.diag(rng.uniform(0.1, 10.0, size=sys.n)) @ v
            transformed.append(
                LinearSystem(np.linalg.solve(T, sys.A @ T), sys.C @ T)
            )
        again = modelbased.build(*transformed, N)
        assert np.max(np.abs(again.wM - clf.wM)) <= 1e-8


class TestSerialization:
    def test_schema(self, scalar_clf):
        doc = json.loads(scalar_clf.to_json())
        assert list(doc.keys()) == ["N", "m", "Q"]

    def test_roundtrip_classifies_identically(self, scalar_clf):
        again = ModelBasedClassifier.from_json(scalar_clf.to_json())
        rng = np.random.default_rng(4)
        for _ in range(20):
            y = rng.normal(size=2)
            assert modelbased.classify(again, y) == modelbased.classify(scalar_clf, y)

    def test_loaded_classifier_lacks_factors(self, scalar_clf):
        again = ModelBasedClassifier.from_json(scalar_clf.to_json())
        with pytest.raises(ValueError):
            modelbased.residual_distance(again, [1.0, 1.0], 1)
        with pytest.raises(ValueError):
            modelbased.support_vector_form(again)
