import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from longae.graph import UNK, AugmentedRow, MaskedAdjacency, build_adjacency
from longae.losses import (LossConfig, alpha_mbce, class_ce, compute_zeta, feature_ce, mbce, multitask_loss,
                           row_zetas)
from longae.model import ForwardTrace
from oracles import central_difference, max_relative_error

LN2 = math.log(2.0)


def plain_masked_bce(t, l, m):
    p = 1.0 / (1.0 + np.exp(-l))
    per = -(t * np.log(p) + (1 - t) * np.log(1 - p))
    return float((per * m).sum() / m.sum())


@st.composite
def masked_rows(draw, rows=3, cols=6):
    t = draw(arrays(np.float64, (rows, cols), elements=st.sampled_from([0.0, 1.0])))
    l = draw(arrays(np.float64, (rows, cols), elements=st.floats(-6, 6, width=64)))
    m = draw(arrays(np.float64, (rows, cols), elements=st.sampled_from([0.0, 1.0])))
    m[:, 0] = 1.0
    return t, l, m


class TestZeta:
    def test_row_scope(self):
        adj = build_adjacency([(0, 1)], 10)
        assert compute_zeta(adj, 0) == 0.75

    def test_limits(self):
        assert row_zetas(np.array([[0, 0, 0, UNK]])).tolist() == [1.0]
        assert row_zetas(np.array([[1, 1, 0, 0]])).tolist() == [0.0]
        # more present than absent clamps to 0
        assert row_zetas(np.array([[1, 1, 1, 0]])).tolist() == [0.0]

    def test_global_counts_every_observed_entry(self):
        e = np.array([[1, 1, UNK], [1, 1, 0], [UNK, 0, 1]], dtype=np.int8)
        assert compute_zeta(MaskedAdjacency(e)) == 0.0  # 5 present vs 2 absent, clamped
        adj = build_adjacency([(0, 1)], 6)
        assert compute_zeta(adj) == pytest.approx(1 - 8 / 28)

    def test_undefined(self):
        with pytest.raises(ValueError):
            compute_zeta(build_adjacency([(0, 1)], 2))


class TestMBCE:
    def test_hand_example(self):
        loss, grad = mbce(np.array([1.0, 0.0, 1.0]), np.array([0.0, 0.0, 5.0]), np.array([1.0, 1.0, 0.0]),
                          zeta=0.5)
        assert loss == pytest.approx((0.5 * LN2 + LN2) / 2, abs=1e-12)
        assert round(loss, 5) == 0.51986
        assert grad[2] == 0.0

    def test_zeta_one_balanced(self):
        loss, _ = mbce(np.array([1.0, 0.0]), np.zeros(2), np.ones(2), zeta=1.0)
        assert loss == pytest.approx(LN2, abs=1e-15)

    @settings(max_examples=50)
    @given(masked_rows())
    def test_zeta_one_is_plain_bce(self, data):
        t, l, m = data
        for r in range(len(t)):
            loss, _ = mbce(t[r], l[r], m[r], zeta=1.0)
            assert loss == pytest.approx(plain_masked_bce(t[r], l[r], m[r]), rel=1e-12)

    @settings(max_examples=50)
    @given(masked_rows(), arrays(np.float64, (3, 6), elements=st.floats(-30, 30, width=64)),
           st.floats(0, 1))
    def test_mask_annihilation(self, data, noise, zeta):
        t, l, m = data
        loss, grad = mbce(t, l, m, zeta=zeta)
        l2 = np.where(m == 0, noise, l)
        t2 = np.where(m == 0, 1 - t, t)
        loss2, grad2 = mbce(t2, l2, m, zeta=zeta)
        assert loss == loss2
        np.testing.assert_array_equal(grad, grad2)
        assert (grad[m == 0] == 0).all()

    @settings(max_examples=30)
    @given(masked_rows(), st.floats(0, 1))
    def test_gradient_finite_differences(self, data, zeta):
        t, l, m = data
        _, grad = mbce(t, l, m, zeta=zeta)
        numeric = central_difference(lambda: mbce(t, l, m, zeta=zeta)[0], l, h=1e-6)
        # central differences at h=1e-6 carry about 1e-10 of rounding noise
        np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-9)

    @settings(max_examples=30)
    @given(masked_rows(), st.floats(0, 1))
    def test_nonnegative_and_batch_mean(self, data, zeta):
        t, l, m = data
        loss, _ = mbce(t, l, m, zeta=zeta)
        rows = [mbce(t[r], l[r], m[r], zeta=zeta)[0] for r in range(3)]
        assert loss >= 0
        assert loss == pytest.approx(np.mean(rows), rel=1e-12)

    def test_descends_on_singleton(self):
        t, l, m = np.array([1.0, 0.0, 1.0]), np.array([-1.0, 2.0, 0.3]), np.ones(3)
        prev = math.inf
        for _ in range(20):
            loss, g = mbce(t, l, m, zeta=0.7)
            assert loss < prev
            prev = loss
            l = l - 1.0 * g
        assert prev > 0

    def test_clamp_saturates_with_zero_gradient(self):
        cfg = LossConfig(epsilon=1e-7)
        loss, grad = mbce(np.array([1.0]), np.array([-40.0]), np.array([1.0]), cfg, zeta=1.0)
        assert loss == pytest.approx(-math.log(1e-7))
        assert grad.tolist() == [0.0]

    def test_per_row_zeta(self):
        t = np.array([[1.0, 0.0], [1.0, 0.0]])
        l = np.zeros((2, 2))
        loss, _ = mbce(t, l, np.ones((2, 2)), zeta=np.array([0.0, 1.0]))
        assert loss == pytest.approx((LN2 / 2 + LN2) / 2)

    def test_errors(self):
        with pytest.raises(ValueError, match="shape"):
            mbce(np.zeros(2), np.zeros(3), np.ones(3))
        with pytest.raises(ValueError, match="masked"):
            mbce(np.zeros(2), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            LossConfig(zeta=1.5)


class TestAlphaMBCE:
    def test_featureless_reduces_to_mbce(self):
        t, l, m = np.array([1.0, 0.0, 0.0]), np.array([0.2, -0.1, 1.0]), np.array([1.0, 1.0, 0.0])
        row = AugmentedRow(t, np.zeros(0), m)
        loss, (ga, gx) = alpha_mbce(row, l, np.zeros(0), zeta=0.4)
        ref, gref = mbce(t, l, m, zeta=0.4)
        assert loss == ref and gx.size == 0
        np.testing.assert_array_equal(ga, gref)

    @pytest.mark.parametrize("x", [1.0, 0.5])
    def test_feature_term(self, x):
        t, m = np.array([1.0, 0.0]), np.ones(2)
        base, _ = mbce(t, np.zeros(2), m, zeta=0.3)
        loss, _ = alpha_mbce(AugmentedRow(t, np.array([x]), m), np.zeros(2), np.zeros(1), zeta=0.3)
        assert loss - base == pytest.approx(LN2, abs=1e-12)

    def test_feature_reduction(self):
        t, l = np.array([1.0, 0.0, 0.5, 1.0]), np.array([0.3, -2.0, 0.0, 1.0])
        mean, gm = feature_ce(t, l, LossConfig())
        total, gs = feature_ce(t, l, LossConfig(feature_reduction="sum"))
        assert total == pytest.approx(4 * mean)
        np.testing.assert_allclose(gs, 4 * gm)
        numeric = central_difference(lambda: feature_ce(t, l)[0], l, h=1e-6)
        assert max_relative_error(gm, numeric) < 1e-6


class TestMultitask:
    def _row(self):
        t = np.array([1.0, 0.0, 1.0, 0.0])
        return AugmentedRow(t, np.zeros(0), np.array([1.0, 1.0, 0.0, 1.0])), np.array([0.5, -1.0, 3.0, 0.2])

    def test_unlabelled_equals_mbce(self):
        row, a_hat = self._row()
        trace = ForwardTrace(x=None, a_hat=a_hat[None, :], class_logits=np.array([[0.3, -0.2, 1.0]]))
        loss, grads = multitask_loss(row, trace, -1, zeta=0.6)
        ref, gref = mbce(row.a_part, a_hat, row.mask, zeta=0.6)
        assert loss == ref
        np.testing.assert_array_equal(grads["a_hat"][0], gref)
        assert not grads["class_logits"].any()

    def test_uniform_head_seven_classes(self):
        row, a_hat = self._row()
        trace = ForwardTrace(x=None, a_hat=a_hat[None, :], class_logits=np.zeros((1, 7)))
        loss, _ = multitask_loss(row, trace, 3, zeta=0.6)
        ref, _ = mbce(row.a_part, a_hat, row.mask, zeta=0.6)
        assert loss - ref == pytest.approx(math.log(7), abs=1e-12)
        assert round(math.log(7), 6) == 1.945910

    def test_sum_of_parts(self):
        row, a_hat = self._row()
        logits = np.array([[0.3, -0.2, 1.0]])
        trace = ForwardTrace(x=None, a_hat=a_hat[None, :], class_logits=logits)
        loss, grads = multitask_loss(row, trace, 2, zeta=0.6)
        ce = -(logits[0, 2] - math.log(np.exp(logits[0]).sum()))
        assert loss == pytest.approx(mbce(row.a_part, a_hat, row.mask, zeta=0.6)[0] + ce, rel=1e-14)
        numeric = central_difference(lambda: class_ce(logits, [2])[0].sum(), logits, h=1e-6)
        assert max_relative_error(grads["class_logits"], numeric) < 1e-6

    def test_label_errors(self):
        with pytest.raises(ValueError):
            class_ce(np.zeros((1, 3)), [3])
        row, a_hat = self._row()
        with pytest.raises(ValueError, match="classifier"):
            multitask_loss(row, ForwardTrace(x=None, a_hat=a_hat[None, :]), 1)
