import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from longae.metrics import accuracy, average_precision, precision_at_k, rank_by_score, roc_auc
from oracles import brute_ap, brute_auc, brute_precision_at_k


@st.composite
def scored(draw, max_n=50, tied=True):
    n = draw(st.integers(2, max_n))
    elems = st.integers(0, 6).map(float) if tied else st.floats(-1e6, 1e6, allow_nan=False)
    scores = draw(st.lists(elems, min_size=n, max_size=n))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    assume(0 < sum(labels) < n)
    return np.array(scores), np.array(labels)


class TestAUC:
    def test_examples(self):
        assert roc_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
        assert roc_auc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5
        assert roc_auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    @settings(max_examples=200)
    @given(scored())
    def test_brute_force(self, data):
        s, y = data
        assert roc_auc(s, y) == brute_auc(s.tolist(), y.tolist())

    @settings(max_examples=50)
    @given(scored(tied=False))
    def test_monotone_invariance_and_flip(self, data):
        s, y = data
        base = roc_auc(s, y)
        # power-of-two scaling and a remap of the distinct values are exactly monotone
        assert roc_auc(np.ldexp(s, 3), y) == base
        uniq, inv = np.unique(s, return_inverse=True)
        assert roc_auc(np.exp(np.linspace(-3, 3, len(uniq)))[inv], y) == base
        if len(np.unique(s)) == len(s):
            assert roc_auc(s, 1 - y) == pytest.approx(1 - base, abs=1e-15)

    def test_needs_both_classes(self):
        with pytest.raises(ValueError):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(ValueError):
            roc_auc([0.1], [1, 0])


class TestAP:
    def test_examples(self):
        assert average_precision([0.9, 0.5, 0.2], [1, 0, 1]) == pytest.approx((1 + 2 / 3) / 2)
        assert average_precision([0.9, 0.8, 0.1, 0.0], [1, 1, 0, 0]) == 1.0

    @settings(max_examples=200)
    @given(scored())
    def test_brute_force(self, data):
        s, y = data
        assert abs(average_precision(s, y) - brute_ap(s.tolist(), y.tolist())) <= 1e-12

    def test_ties_break_by_index(self):
        # equal scores: the earlier index ranks first
        assert average_precision([0.5, 0.5], [1, 0]) == 1.0
        assert average_precision([0.5, 0.5], [0, 1]) == 0.5
        assert rank_by_score([0.5, 0.7, 0.5]).tolist() == [1, 0, 2]


class TestPrecisionAtK:
    def test_examples(self):
        assert precision_at_k([1, 0, 1], 2) == 0.5
        assert precision_at_k([1, 1, 0, 0], 2) == 1.0
        assert precision_at_k([1, 0, 1, 1], [1, 2, 4]).tolist() == [1.0, 0.5, 0.75]

    @settings(max_examples=200)
    @given(scored(), st.data())
    def test_brute_force(self, data, draw):
        s, y = data
        k = draw.draw(st.integers(1, len(s)))
        rel = y[rank_by_score(s)]
        assert precision_at_k(rel, k) == brute_precision_at_k(s.tolist(), y.tolist(), k)

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
    def test_hit_count_monotone(self, rel):
        ks = np.arange(1, len(rel) + 1)
        hits = precision_at_k(rel, ks) * ks
        assert (np.diff(np.round(hits)) >= 0).all()

    def test_bounds(self):
        with pytest.raises(ValueError):
            precision_at_k([1, 0], 3)
        with pytest.raises(ValueError):
            precision_at_k([1, 0], 0)


class TestAccuracy:
    def test_examples(self):
        assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
        assert accuracy([1, 2, 0], [0, 1, 2]) == 0.0
        assert accuracy([0, 1, 2], [0, 1, 1]) == pytest.approx(2 / 3)

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy([0], [0, 1])
        with pytest.raises(ValueError):
            accuracy([], [])
