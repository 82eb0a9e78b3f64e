import math

import numpy as np
import pytest

from puavg.data import DomainDataset, LinkConstants
from puavg.errors import IllPosedLikelihoodError
from puavg.likelihoods import Objective, binary_nll_grad, pu_mean_nll, \
    pu_nll_grad, semi_nll_grad

from conftest import fd_gradient, random_pu_dataset, rel_err

LOG2 = math.log(2.0)


def binary_obj(rng, n=20, p=3):
    x = rng.normal(size=(n, p))
    y = rng.integers(0, 2, n).astype(float)
    if y.sum() in (0, n):
        y[0] = 1.0 - y[0]
    return Objective.for_dataset(DomainDataset.binary(x, y))


class TestBinary:
    def test_value_at_zero_is_log2(self, rng):
        obj = binary_obj(rng)
        v, _ = binary_nll_grad(np.zeros(3), obj)
        assert v == pytest.approx(LOG2, abs=1e-12)

    def test_gradient_at_zero_closed_form(self):
        x = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        y = np.array([1.0, 0.0, 1.0])
        obj = Objective.for_dataset(DomainDataset.binary(x, y))
        _, g = binary_nll_grad(np.zeros(2), obj)
        expected = -(x * (y - 0.5)[:, None]).mean(axis=0)
        np.testing.assert_allclose(g, expected, atol=1e-14)

    def test_gradient_matches_finite_differences(self, rng):
        obj = binary_obj(rng, n=20, p=3)
        for _ in range(10):
            beta = rng.normal(size=3)
            _, g = obj.value_grad(beta)
            fd = fd_gradient(lambda b: obj.value_grad(b)[0], beta)
            assert rel_err(g, fd) < 1e-5

    def test_kind_mismatch_rejected(self, rng):
        ds, _ = random_pu_dataset(rng, 20, 2)
        with pytest.raises(ValueError, match="expected binary"):
            binary_nll_grad(np.zeros(2), Objective.for_dataset(ds))


class TestPu:
    def test_handcrafted_two_row_value(self):
        ds = DomainDataset.pu(np.ones((2, 1)), [1, 0], pi1=0.5)
        obj = Objective(data=ds, constants=LinkConstants(b=1.0))
        v, _ = pu_nll_grad(np.zeros(1), obj)
        assert v == pytest.approx(0.7520387, abs=1e-7)

    def test_all_unlabeled_b_zero_limit(self):
        # degenerate limit exercised on the predictor-space form
        eta = np.array([-3.0, 0.4, 12.0])
        assert pu_mean_nll(eta, np.zeros(3), 0.0) == 0.0

    def test_gradient_matches_finite_differences(self, rng):
        ds, _ = random_pu_dataset(rng, 30, 4)
        obj = Objective(data=ds, constants=LinkConstants(b=0.8))
        for _ in range(10):
            beta = rng.normal(size=4)
            _, g = obj.value_grad(beta)
            fd = fd_gradient(lambda b: obj.value_grad(b)[0], beta)
            assert rel_err(g, fd) < 1e-5

    def test_z_equals_y_stays_finite_and_smooth(self, rng):
        x = rng.normal(size=(40, 3))
        y = (rng.random(40) < 0.5).astype(float)
        y[0], y[1] = 1.0, 0.0
        ds = DomainDataset.pu(x, y, pi1=0.5)
        obj = Objective(data=ds, constants=LinkConstants(b=1.3))
        beta = rng.normal(size=3)
        v, g = obj.value_grad(beta)
        assert np.isfinite(v) and np.all(np.isfinite(g))
        fd = fd_gradient(lambda b: obj.value_grad(b)[0], beta)
        assert rel_err(g, fd) < 1e-5


class TestSemi:
    def semi_objective(self, rng, n, p, constants):
        x = rng.normal(size=(n, p))
        z = (rng.random(n) < 0.4).astype(float)
        z[0], z[1] = 1.0, 0.0
        y = np.full(n, np.nan)
        lab = z == 1
        y[lab] = (rng.random(int(lab.sum())) < 0.5).astype(float)
        ds = DomainDataset.semi(x, z, y, pi1=0.5)
        return Objective(data=ds, constants=constants)

    def test_symmetric_constants_contribution(self):
        x = np.ones((2, 1))
        ds = DomainDataset.semi(x, [1, 0], [1.0, np.nan], pi1=0.5)
        obj = Objective(data=ds, constants=LinkConstants(h0=0.5, h1=0.5, nu=0.0))
        v, _ = semi_nll_grad(np.zeros(1), obj)
        # labeled row: -log(0.25); unlabeled row: -log(0.5)
        assert v == pytest.approx((2 * LOG2 + LOG2) / 2.0, abs=1e-12)

    def test_equal_h_makes_unlabeled_rows_inert(self, rng):
        c = LinkConstants(h0=0.37, h1=0.37, nu=0.21)
        obj = self.semi_objective(rng, 30, 3, c)
        beta = rng.normal(size=3)
        _, g_all = obj.value_grad(beta)
        lab = obj.data.z == 1
        labeled_only = Objective(data=obj.data.subset(lab), constants=c)
        _, g_lab = labeled_only.value_grad(beta)
        # unlabeled rows contribute nothing: gradients agree up to the n scaling
        np.testing.assert_allclose(g_all * obj.n, g_lab * labeled_only.n,
                                   atol=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        c = LinkConstants(h0=0.42, h1=0.63, nu=0.44)
        obj = self.semi_objective(rng, 40, 3, c)
        for _ in range(10):
            beta = rng.normal(size=3)
            _, g = obj.value_grad(beta)
            fd = fd_gradient(lambda b: obj.value_grad(b)[0], beta)
            assert rel_err(g, fd) < 1e-5

    def test_ill_posed_bracket_raises(self):
        # 1 - h0 == 1e-13 and strongly negative predictors push the mixture
        # term below the clamp on every unlabeled row
        x = np.full((10, 1), 30.0)
        z = np.array([1.0] + [0.0] * 9)
        y = np.full(10, np.nan)
        y[0] = 1.0
        ds = DomainDataset.semi(x, z, y, pi1=0.5)
        obj = Objective(data=ds,
                        constants=LinkConstants(h0=1 - 1e-13, h1=1 - 1e-13, nu=0.0))
        with pytest.raises(IllPosedLikelihoodError, match="ill-posed"):
            semi_nll_grad(np.array([-1.0]), obj)
        # clamp count surfaces through the non-raising path
        _, _, n_clamped = obj.value_grad_clamped(np.array([-1.0]))
        assert n_clamped == 9


class TestSharedContracts:
    def test_duplicating_rows_leaves_mean_form_unchanged(self, rng):
        ds, _ = random_pu_dataset(rng, 25, 3)
        obj = Objective.for_dataset(ds)
        doubled = DomainDataset.pu(np.vstack([ds.x, ds.x]),
                                   np.concatenate([ds.z, ds.z]), pi1=ds.pi1)
        obj2 = Objective(data=doubled, constants=obj.constants)
        beta = rng.normal(size=3)
        v1, g1 = obj.value_grad(beta)
        v2, g2 = obj2.value_grad(beta)
        assert v1 == pytest.approx(v2, abs=1e-12)
        np.testing.assert_allclose(g1, g2, atol=1e-12)

    def test_sum_form_is_n_times_mean_form(self, rng):
        ds, _ = random_pu_dataset(rng, 33, 3)
        obj = Objective.for_dataset(ds)
        beta = rng.normal(size=3)
        v, g = obj.value_grad(beta)
        vs, gs = obj.value_grad_sum(beta)
        assert vs == pytest.approx(33 * v, abs=1e-10)
        np.testing.assert_allclose(gs, 33 * g, atol=1e-10)

    def test_dimension_mismatch(self, rng):
        ds, _ = random_pu_dataset(rng, 10, 3)
        with pytest.raises(ValueError, match="shape"):
            Objective.for_dataset(ds).value_grad(np.zeros(4))
