import numpy as np
import pytest

from otkit import kron_ops


def dense_A(m, n):
    """Explicit constraint matrix built from its Kronecker definition."""
    top = np.kron(np.ones((1, n)), np.eye(m))
    bottom = np.kron(np.eye(n), np.ones((1, m)))
    return np.vstack((top, bottom))


class TestApplyA:
    def test_row_and_column_sums(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(-1, order="F")
        np.testing.assert_allclose(kron_ops.apply_A(x, 2, 2), [3, 7, 4, 6])

    def test_zero_maps_to_zero(self):
        np.testing.assert_array_equal(kron_ops.apply_A(np.zeros(6), 2, 3),
                                      np.zeros(5))

    def test_matches_dense_operator(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(9)
        np.testing.assert_allclose(kron_ops.apply_A(x, 3, 3), dense_A(3, 3) @ x,
                                   rtol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kron_ops.apply_A(np.zeros(5), 2, 3)

    @pytest.mark.parametrize("m,n", [(2, 2), (3, 5), (16, 16), (7, 1)])
    def test_dense_agreement_random_shapes(self, m, n):
        rng = np.random.default_rng(m * 100 + n)
        x = rng.standard_normal(m * n)
        np.testing.assert_allclose(kron_ops.apply_A(x, m, n), dense_A(m, n) @ x,
                                   rtol=1e-13, atol=1e-13)


class TestApplyAT:
    def test_entrywise_sum(self):
        out = kron_ops.apply_AT(np.array([1.0, 2.0]), np.array([10.0, 20.0]), 2, 2)
        np.testing.assert_allclose(out, [11, 12, 21, 22])

    def test_zero(self):
        np.testing.assert_array_equal(
            kron_ops.apply_AT(np.zeros(2), np.zeros(2), 2, 2), np.zeros(4))

    def test_matches_dense_transpose(self):
        rng = np.random.default_rng(1)
        u, w = rng.standard_normal(3), rng.standard_normal(2)
        np.testing.assert_allclose(
            kron_ops.apply_AT(u, w, 3, 2),
            dense_A(3, 2).T @ np.concatenate((u, w)), rtol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kron_ops.apply_AT(np.zeros(3), np.zeros(2), 2, 2)


class TestAdjointAndNull:
    def test_adjointness(self):
        rng = np.random.default_rng(2)
        m, n = 4, 6
        x = rng.standard_normal(m * n)
        u, w = rng.standard_normal(m), rng.standard_normal(n)
        lhs = kron_ops.apply_A(x, m, n) @ np.concatenate((u, w))
        rhs = x @ kron_ops.apply_AT(u, w, m, n)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_left_null_vector(self):
        rng = np.random.default_rng(3)
        m, n = 5, 3
        x = rng.standard_normal(m * n)
        null = np.concatenate((np.ones(m), -np.ones(n)))
        assert null @ kron_ops.apply_A(x, m, n) == pytest.approx(0.0, abs=1e-12)


class TestRestricted:
    def test_full_support_matches_apply_A(self):
        rng = np.random.default_rng(4)
        m, n = 3, 4
        x = rng.standard_normal(m * n)
        full = np.arange(m * n)
        np.testing.assert_allclose(
            kron_ops.apply_A_restricted(x, full, m, n),
            kron_ops.apply_A(x, m, n), rtol=1e-14)

    def test_single_column(self):
        out = kron_ops.apply_A_restricted(np.array([5.0]), np.array([0]), 2, 2)
        np.testing.assert_allclose(out, [5, 0, 5, 0])

    def test_matches_zero_padded_dense(self):
        rng = np.random.default_rng(5)
        m, n = 4, 4
        support = np.sort(rng.choice(m * n, size=7, replace=False))
        x_red = rng.standard_normal(7)
        padded = np.zeros(m * n)
        padded[support] = x_red
        np.testing.assert_allclose(
            kron_ops.apply_A_restricted(x_red, support, m, n),
            dense_A(m, n) @ padded, rtol=1e-13, atol=1e-14)

    def test_out_of_range_support(self):
        with pytest.raises(IndexError):
            kron_ops.apply_A_restricted(np.ones(1), np.array([4]), 2, 2)

    def test_transpose_restriction(self):
        rng = np.random.default_rng(6)
        m, n = 3, 5
        support = np.sort(rng.choice(m * n, size=6, replace=False))
        u, w = rng.standard_normal(m), rng.standard_normal(n)
        full = kron_ops.apply_AT(u, w, m, n)
        np.testing.assert_allclose(
            kron_ops.apply_AT_restricted(u, w, support, m), full[support])


class TestColumnEndpoints:
    def test_middle_column(self):
        # third variable of a 2-row layout sits at source 0, sink 1
        assert kron_ops.column_endpoints(2, 2, 2) == (0, 1)

    def test_wraparound_column(self):
        assert kron_ops.column_endpoints(1, 2, 2) == (1, 0)

    def test_last_column(self):
        assert kron_ops.column_endpoints(15, 4, 4) == (3, 3)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            kron_ops.column_endpoints(np.array([4]), 2, 2)

    def test_operator_shape(self):
        op = kron_ops.ConstraintOperator(3, 4)
        assert op.shape == (7, 12)
        with pytest.raises(ValueError):
            kron_ops.ConstraintOperator(0, 1)
