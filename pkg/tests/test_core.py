import numpy as np
import pytest

from spurcorr.core import Dataset, RngStream, center_columns, gaussian_vector, subset_gram
from spurcorr.errors import SingularGram

from conftest import make_orthonormal_design


class TestCenterColumns:
    def test_symmetric_shift(self):
        d = Dataset(x=np.array([[1.0], [2.0], [3.0]]))
        out = center_columns(d)
        np.testing.assert_allclose(out.x[:, 0], [-1.0, 0.0, 1.0], atol=1e-15)

    def test_idempotent(self):
        g = np.random.default_rng(1)
        d = Dataset(x=g.standard_normal((20, 4)), y=g.standard_normal(20))
        once = center_columns(d)
        twice = center_columns(once)
        assert np.max(np.abs(twice.x - once.x)) < 1e-12
        assert np.max(np.abs(twice.y - once.y)) < 1e-12
        assert np.max(np.abs(once.x.mean(axis=0))) < 1e-12
        assert abs(once.y.mean()) < 1e-12

    def test_constant_column_maps_to_zero(self):
        d = Dataset(x=np.array([[5.0], [5.0]]))
        out = center_columns(d)
        np.testing.assert_array_equal(out.x[:, 0], [0.0, 0.0])

    def test_linearity(self):
        g = np.random.default_rng(2)
        x = g.standard_normal((15, 3))
        a, b = 2.5, -7.0
        lhs = center_columns(Dataset(x=a * x + b)).x
        rhs = a * center_columns(Dataset(x=x)).x
        assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestSubsetGram:
    def test_orthonormal_identity(self):
        d = make_orthonormal_design(12, 5, seed=3)
        cache = subset_gram(d, [0, 1])
        assert np.max(np.abs(cache.chol - np.eye(2))) < 1e-10

    def test_duplicate_columns_singular(self):
        g = np.random.default_rng(4)
        col = g.standard_normal(10)
        d = Dataset(x=np.column_stack([col, col, g.standard_normal(10)]))
        with pytest.raises(SingularGram):
            subset_gram(d, [0, 1])

    def test_reconstruction_matches_direct_gram(self):
        g = np.random.default_rng(5)
        d = Dataset(x=g.standard_normal((6, 3)))
        cache = subset_gram(d, [0, 1, 2])
        xc = d.x - d.x.mean(axis=0)
        direct = xc.T @ xc / d.n
        recon = cache.chol @ cache.chol.T
        assert np.linalg.norm(recon - direct) < 1e-12

    def test_permutation_consistency(self):
        g = np.random.default_rng(6)
        x = g.standard_normal((25, 7))
        idx = [1, 3, 6]
        base = subset_gram(Dataset(x=x), idx)
        perm = np.array([6, 1, 3, 0, 2, 5, 4])
        x_perm = x[:, perm]
        mapped = sorted(int(np.where(perm == j)[0][0]) for j in idx)
        other = subset_gram(Dataset(x=x_perm), mapped)
        orig_cols = [perm[j] for j in other.subset]
        order = np.argsort(orig_cols)
        recon = (other.chol @ other.chol.T)[np.ix_(order, order)]
        np.testing.assert_allclose(recon, base.chol @ base.chol.T, atol=1e-12)

    def test_validation(self):
        d = Dataset(x=np.random.default_rng(0).standard_normal((5, 3)))
        with pytest.raises(ValueError):
            subset_gram(d, [])
        with pytest.raises(ValueError):
            subset_gram(d, [2, 1])
        with pytest.raises(ValueError):
            subset_gram(d, [0, 3])


class TestRngStream:
    def test_determinism(self):
        a = gaussian_vector(RngStream(7, ("bootstrap", 3)), 50)
        b = gaussian_vector(RngStream(7, ("bootstrap", 3)), 50)
        np.testing.assert_array_equal(a, b)

    def test_child_path_equivalence(self):
        direct = RngStream(9, ("x", 2))
        derived = RngStream(9).child("x").child(2)
        np.testing.assert_array_equal(
            gaussian_vector(direct, 10), gaussian_vector(derived, 10)
        )

    def test_moments_million_draws(self):
        v = gaussian_vector(RngStream(123, ("moments",)), 10**6)
        assert abs(v.mean()) < 0.005
        assert abs(v.var() - 1.0) < 0.01

    def test_disjoint_paths_uncorrelated(self):
        a = gaussian_vector(RngStream(5, ("left",)), 10**5)
        b = gaussian_vector(RngStream(5, ("right",)), 10**5)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.02

    def test_order_independence(self):
        root = RngStream(11)
        first_then_second = [
            gaussian_vector(root.child("a"), 5),
            gaussian_vector(root.child("b"), 5),
        ]
        second_then_first = [
            gaussian_vector(root.child("b"), 5),
            gaussian_vector(root.child("a"), 5),
        ]
        np.testing.assert_array_equal(first_then_second[0], second_then_first[1])
        np.testing.assert_array_equal(first_then_second[1], second_then_first[0])

    def test_validation(self):
        with pytest.raises(ValueError):
            gaussian_vector(RngStream(1), 0)
        with pytest.raises(ValueError):
            RngStream(-1)


class TestDataset:
    def test_invariants(self):
        with pytest.raises(ValueError):
            Dataset(x=np.ones((1, 2)))
        with pytest.raises(ValueError):
            Dataset(x=np.array([[1.0, np.nan], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            Dataset(x=np.ones((3, 2)), y=np.ones(2))
