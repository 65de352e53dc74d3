import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import random_feasible_pair, random_observable_system
from trajclass.sysmodel import (
    ContinuousSiso,
    LinearSystem,
    NotObservableError,
    close_loop,
    discretize,
    feasibility_check,
    observability_matrix,
    parallel_interconnection,
    tf_to_ss,
)

SYS_GROWTH = LinearSystem([[1.0, 1.0], [0.0, 1.0]], [[1.0, 0.0]])
SYS_P = LinearSystem(1.0, 1.0)
SYS_M = LinearSystem(-1.0, 1.0)
PLANT = ContinuousSiso(num=(1.0, 1.0), den=(10.0, 11.0, 11.0, 1.0))


class TestLinearSystem:
    def test_dimensions(self):
        assert SYS_GROWTH.n == 2 and SYS_GROWTH.m == 1

    def test_rejects_non_square_A(self):
        with pytest.raises(ValueError):
            LinearSystem(np.ones((2, 3)), np.ones((1, 3)))

    def test_rejects_mismatched_C(self):
        with pytest.raises(ValueError):
            LinearSystem(np.eye(2), np.ones((1, 3)))

    def test_rejects_unobservable(self):
        with pytest.raises(NotObservableError):
            LinearSystem(np.eye(2), [[1.0, 0.0]])

    def test_json_roundtrip_and_field_order(self):
        text = SYS_GROWTH.to_json()
        assert text.startswith('{"A":')
        again = LinearSystem.from_json(text)
        assert np.array_equal(again.A, SYS_GROWTH.A)
        assert np.array_equal(again.C, SYS_GROWTH.C)


class TestObservabilityMatrix:
    def test_jordan_block(self):
        O = observability_matrix(SYS_GROWTH, 3).O
        assert np.array_equal(O, [[1, 0], [1, 1], [1, 2]])

    def test_scalar_pair(self):
        assert np.array_equal(observability_matrix(SYS_P, 2).O, [[1], [1]])
        assert np.array_equal(observability_matrix(SYS_M, 2).O, [[1], [-1]])

    def test_rejects_zero_horizon(self):
        with pytest.raises(ValueError):
            observability_matrix(SYS_P, 0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
    def test_prefix_nesting(self, seed, n, N):
        sys = random_observable_system(np.random.default_rng(seed), n)
        small = observability_matrix(sys, N).O
        big = observability_matrix(sys, N + 1).O
        assert np.array_equal(big[: N * sys.m], small)


class TestFeasibilityCheck:
    def test_scalar_pair_two_samples(self):
        rep = feasibility_check(SYS_P, SYS_M, 2)
        assert rep.feasible and rep.rank == 2
        assert rep.smallest_singular_value > 1.0  # concat is sqrt(2) * orthogonal

    def test_scalar_pair_one_sample(self):
        rep = feasibility_check(SYS_P, SYS_M, 1)
        assert not rep.feasible and rep.rank == 1
        assert rep.horizon_warning is not None

    def test_duplicated_system_never_feasible(self):
        for N in (1, 2, 5):
            assert not feasibility_check(SYS_P, SYS_P, N).feasible

    def test_output_dim_mismatch(self):
        two_out = LinearSystem(np.eye(2) * 0.5, np.eye(2))
        with pytest.raises(ValueError):
            feasibility_check(SYS_P, two_out, 2)

    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng, n_max=3)
        a = feasibility_check(sys1, sys2, N)
        b = feasibility_check(sys2, sys1, N)
        assert a.feasible == b.feasible and a.rank == b.rank
        assert np.isclose(a.smallest_singular_value, b.smallest_singular_value)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_monotone_in_horizon(self, seed, extra):
        rng = np.random.default_rng(seed)
        sys1, sys2, N = random_feasible_pair(rng, n_max=3)
        assert feasibility_check(sys1, sys2, N + extra).feasible


class TestParallelInterconnection:
    def test_scalar_pair(self):
        A, C = parallel_interconnection(SYS_P, SYS_M)
        assert np.array_equal(A, np.diag([1.0, -1.0]))
        assert np.array_equal(C, [[1.0, 1.0]])

    def test_duplication(self):
        A, C = parallel_interconnection(SYS_GROWTH, SYS_GROWTH)
        assert np.array_equal(A[:2, :2], SYS_GROWTH.A)
        assert np.array_equal(A[2:, 2:], SYS_GROWTH.A)
        assert np.count_nonzero(A[:2, 2:]) == 0
        assert np.array_equal(C, np.hstack([SYS_GROWTH.C, SYS_GROWTH.C]))

    def test_shapes(self):
        rng = np.random.default_rng(0)
        s1 = random_observable_system(rng, 3)
        s2 = random_observable_system(rng, 3)
        A, C = parallel_interconnection(s1, s2)
        assert A.shape == (6, 6) and C.shape == (1, 6)


class TestTfToSs:
    def test_reference_plant(self):
        A, C = tf_to_ss(PLANT)
        assert np.array_equal(A, [[0, 1, 0], [0, 0, 1], [-10, -11, -11]])
        assert np.array_equal(C, [[1.0, 1.0, 0.0]])

    def test_first_order(self):
        A, C = tf_to_ss(ContinuousSiso((1.0,), (1.0, 1.0)))
        assert np.array_equal(A, [[-1.0]])
        assert np.array_equal(C, [[1.0]])

    def test_double_integrator(self):
        A, C = tf_to_ss(ContinuousSiso((1.0,), (0.0, 0.0, 1.0)))
        assert np.array_equal(A, [[0, 1], [0, 0]])
        assert np.array_equal(C, [[1.0, 0.0]])

    def test_rejects_improper(self):
        with pytest.raises(ValueError):
            ContinuousSiso((1.0, 1.0), (1.0, 1.0))

    def test_rejects_zero_system(self):
        with pytest.raises(ValueError):
            ContinuousSiso((0.0,), (1.0, 1.0))


class TestCloseLoop:
    def test_reference_plant_gain_30(self):
        w = close_loop(PLANT, 30.0)
        assert w.num == (30.0, 30.0)
        assert w.den == (40.0, 41.0, 11.0, 1.0)

    def test_zero_gain_rejected(self):
        with pytest.raises(ValueError):
            close_loop(PLANT, 0.0)

    def test_first_order(self):
        w = close_loop(ContinuousSiso((1.0,), (1.0, 1.0)), 1.0)
        assert w.num == (1.0,)
        assert w.den == (2.0, 1.0)

    @given(st.integers(0, 2**32 - 1), st.floats(0.5, 50.0))
    def test_transfer_identity_at_random_points(self, seed, K):
        # W(s) (1 + K G(s)) == K G(s) wherever both are defined.
        rng = np.random.default_rng(seed)
        w = close_loop(PLANT, K)
        for _ in range(5):
            s = complex(rng.normal(), rng.normal())
            lhs = w(s) * (1.0 + K * PLANT(s))
            rhs = K * PLANT(s)
            assert abs(lhs - rhs) <= 1e-9 * max(abs(rhs), 1e-12)


class TestDiscretize:
    def test_scalar_zero_dynamics(self):
        sys = discretize(np.zeros((1, 1)), [[1.0]], 0.7)
        assert np.allclose(sys.A, [[1.0]])

    def test_scalar_pole(self):
        sys = discretize([[-2.0]], [[1.0]], 0.25)
        assert np.allclose(sys.A, [[np.exp(-0.5)]], rtol=1e-12)

    def test_nilpotent(self):
        sys = discretize([[0.0, 1.0], [0.0, 0.0]], [[1.0, 0.0]], 0.5)
        assert np.allclose(sys.A, [[1.0, 0.5], [0.0, 1.0]], atol=1e-14)

    def test_rejects_nonpositive_Ts(self):
        with pytest.raises(ValueError):
            discretize([[-1.0]], [[1.0]], 0.0)

    def test_aliasing_raises_observability_error(self):
        # Rotation sampled at its full period collapses A to the identity.
        rotation = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(NotObservableError):
            discretize(rotation, [[1.0, 0.0]], 2.0 * np.pi)

    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
    def test_sampling_semigroup(self, seed, t1, t2):
        rng = np.random.default_rng(seed)
        A_c = rng.normal(size=(3, 3))
        A_c = A_c - (max(np.linalg.eigvals(A_c).real) + 0.2) * np.eye(3)
        C = rng.normal(size=(1, 3))
        try:
            whole = discretize(A_c, C, t1 + t2).A
            split = discretize(A_c, C, t1).A @ discretize(A_c, C, t2).A
        except NotObservableError:
            return  # sampling killed observability; nothing to compare
        assert np.linalg.norm(whole - split) <= 1e-8 * np.linalg.norm(whole)


class TestSisoJson:
    def test_roundtrip_and_field_order(self):
        text = PLANT.to_json()
        assert text.startswith('{"num":')
        again = ContinuousSiso.from_json(text)
        assert again.num == PLANT.num and again.den == PLANT.den

    def test_json_is_ascending_coefficients(self):
        doc = json.loads(PLANT.to_json())
        assert doc["den"] == [10.0, 11.0, 11.0, 1.0]
