import numpy as np
import pytest

from puavg.data import DomainDataset, constants_for, pu_constant, semi_constants
from puavg.errors import DataError


class TestPuConstant:
    def test_basic(self):
        assert pu_constant(100, 300, 0.5).b == pytest.approx(2.0 / 3.0, abs=1e-7)
        assert pu_constant(120, 280, 0.3).b == pytest.approx(1.4285714, abs=1e-7)
        assert pu_constant(1, 1, 0.5).b == 2.0

    def test_counts_recorded(self):
        assert pu_constant(10, 20, 0.5).counts == (10, 20)

    @pytest.mark.parametrize("nl,nu", [(0, 10), (10, 0), (0, 0)])
    def test_degenerate(self, nl, nu):
        with pytest.raises(DataError, match="degenerate PU"):
            pu_constant(nl, nu, 0.5)

    def test_bad_prior(self):
        with pytest.raises(DataError):
            pu_constant(5, 5, 0.0)
        with pytest.raises(DataError):
            pu_constant(5, 5, 1.0)


class TestSemiConstants:
    def test_symmetric(self):
        c = semi_constants(50, 50, 100, 0.5)
        assert c.h0 == 0.5 and c.h1 == 0.5
        assert c.nu == pytest.approx(0.0, abs=1e-14)

    def test_asymmetric_prior(self):
        c = semi_constants(50, 50, 100, 0.3)
        assert c.h1 == pytest.approx(0.625, abs=1e-12)
        assert c.h0 == pytest.approx(50.0 / 120.0, abs=1e-12)
        assert c.nu == pytest.approx(0.4418328, abs=1e-7)

    def test_zero_count_is_error(self):
        with pytest.raises(DataError, match="degenerate semi"):
            semi_constants(10, 90, 0, 0.5)
        with pytest.raises(DataError):
            semi_constants(0, 90, 10, 0.5)


class TestDomainDataset:
    def test_binary_defaults_prior_to_empirical_rate(self):
        ds = DomainDataset.binary(np.zeros((4, 2)), [1, 0, 0, 1])
        assert ds.pi1 == 0.5
        assert ds.scheme == "binary"

    def test_pu_requires_both_label_states(self):
        with pytest.raises(DataError, match="at least one"):
            DomainDataset.pu(np.zeros((3, 1)), [1, 1, 1], pi1=0.5)
        with pytest.raises(DataError, match="at least one"):
            DomainDataset.pu(np.zeros((3, 1)), [0, 0, 0], pi1=0.5)

    def test_semi_mask_alignment_enforced(self):
        x = np.zeros((3, 1))
        DomainDataset.semi(x, [1, 0, 1], [1.0, np.nan, 0.0], pi1=0.4)
        with pytest.raises(DataError, match="exactly where z=1"):
            DomainDataset.semi(x, [1, 0, 1], [1.0, 0.0, 0.0], pi1=0.4)
        with pytest.raises(DataError, match="exactly where z=1"):
            DomainDataset.semi(x, [1, 0, 1], [np.nan, np.nan, 0.0], pi1=0.4)

    def test_label_length_mismatch(self):
        with pytest.raises(DataError, match="shape"):
            DomainDataset.pu(np.zeros((3, 1)), [1, 0], pi1=0.5)

    def test_prior_bounds(self):
        with pytest.raises(DataError, match="pi1"):
            DomainDataset.pu(np.zeros((2, 1)), [1, 0], pi1=1.0)

    def test_nonbinary_labels_rejected(self):
        with pytest.raises(DataError, match="0 or 1"):
            DomainDataset.pu(np.zeros((2, 1)), [1, 2], pi1=0.5)

    def test_immutable_arrays(self):
        ds = DomainDataset.pu(np.zeros((2, 1)), [1, 0], pi1=0.5)
        with pytest.raises(ValueError):
            ds.x[0, 0] = 1.0
        with pytest.raises(ValueError):
            ds.z[0] = 0.0

    def test_subset_preserves_scheme(self):
        x = np.arange(8.0).reshape(4, 2)
        ds = DomainDataset.semi(x, [1, 0, 1, 0], [1.0, np.nan, 0.0, np.nan],
                                pi1=0.4)
        sub = ds.subset(np.array([True, True, False, False]))
        assert sub.n == 2
        assert sub.labeled_counts() == (0, 1)

    def test_labeled_counts(self):
        ds = DomainDataset.semi(np.zeros((4, 1)), [1, 1, 1, 0],
                                [1.0, 0.0, 0.0, np.nan], pi1=0.4)
        assert ds.labeled_counts() == (2, 1)
        assert ds.n_labeled == 3
        assert ds.n_unlabeled == 1


def test_constants_for_dispatch():
    pu = DomainDataset.pu(np.zeros((4, 1)), [1, 0, 0, 0], pi1=0.25)
    assert constants_for(pu).b == pytest.approx(1.0 / (0.25 * 3.0))
    semi = DomainDataset.semi(np.zeros((4, 1)), [1, 1, 0, 0],
                              [1.0, 0.0, np.nan, np.nan], pi1=0.5)
    c = constants_for(semi)
    assert c.counts == (1, 1, 2)
    binary = DomainDataset.binary(np.zeros((2, 1)), [0, 1])
    assert constants_for(binary).b is None
