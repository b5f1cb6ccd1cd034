import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from longae.numeric import (dropout, float_dtype, make_rng, matvec, mvn_backward, mvn_normalize, relu,
                            sigmoid, sigmoid_softmax, softmax, xavier_init)
from oracles import central_difference

finite = st.floats(-50, 50, allow_nan=False, width=64)


class TestMatvec:
    def test_identity(self):
        assert matvec(np.eye(3), np.array([1.0, 2.0, 3.0])).tolist() == [1.0, 2.0, 3.0]

    def test_small(self):
        assert matvec(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones(2)).tolist() == [3.0, 7.0]

    def test_brute_force(self):
        rng = np.random.default_rng(3)
        M = rng.integers(-9, 9, (5, 4)).astype(float)
        v = rng.integers(-9, 9, 4).astype(float)
        expect = [sum(M[r, c] * v[c] for c in range(4)) for r in range(5)]
        assert matvec(M, v).tolist() == expect

    @given(arrays(np.float64, (4, 3), elements=finite), arrays(np.float64, 4, elements=finite))
    def test_transpose_matches_explicit(self, M, v):
        np.testing.assert_array_equal(matvec(M, v, transpose=True), matvec(np.ascontiguousarray(M.T), v))

    def test_mismatch_names_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2,\)"):
            matvec(np.zeros((2, 3)), np.zeros(2))


class TestActivations:
    def test_relu_examples(self):
        assert relu(np.array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 2.0]
        assert not relu(-np.arange(1.0, 5.0)).any()

    @given(arrays(np.float64, 7, elements=finite))
    def test_relu_idempotent_nonnegative(self, v):
        r = relu(v)
        assert (r >= 0).all()
        np.testing.assert_array_equal(relu(r), r)

    def test_sigmoid_softmax_examples(self):
        assert sigmoid_softmax(np.array([0.0]), "sigmoid").tolist() == [0.5]
        assert sigmoid_softmax(np.array([0.0, 0.0]), "softmax").tolist() == [0.5, 0.5]
        big = softmax(np.array([1000.0, 0.0]))
        assert np.isfinite(big).all() and big[0] == pytest.approx(1.0) and big[1] == pytest.approx(0.0)
        with pytest.raises(ValueError):
            sigmoid_softmax(np.zeros(2), "tanh")

    # float64 sigmoid rounds to exactly 1 beyond about 36.7
    @given(arrays(np.float64, 6, elements=st.floats(-30, 30, width=64)))
    def test_ranges(self, v):
        s = sigmoid(v)
        assert ((s > 0) & (s < 1)).all()
        assert abs(softmax(v).sum() - 1.0) < 1e-6

    def test_sigmoid_extremes_do_not_overflow(self):
        with np.errstate(over="raise"):
            s = sigmoid(np.array([-1000.0, 1000.0]))
        assert s.tolist() == [0.0, 1.0]


class TestMVN:
    def test_two_point(self):
        np.testing.assert_allclose(mvn_normalize(np.array([1.0, 3.0])), [-1.0, 1.0], atol=1e-7)

    def test_constant_is_zero(self):
        assert mvn_normalize(np.array([5.0, 5.0, 5.0])).tolist() == [0.0, 0.0, 0.0]

    @given(arrays(np.float64, (3, 9), elements=st.floats(-100, 100, width=64)))
    def test_statistics(self, x):
        x = x[x.var(axis=1) > 1e-3]
        y = mvn_normalize(x)
        assert np.all(np.abs(y.mean(axis=1)) < 1e-6)
        # var(y) = var / (var + eps), so only eps/var away from one
        assert np.all(np.abs(y.var(axis=1) - 1.0) < 1e-4)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 6))
        w = rng.standard_normal((2, 6))
        y, inv = mvn_normalize(x, return_stats=True)
        analytic = mvn_backward(w, y, inv)
        numeric = central_difference(lambda: float((mvn_normalize(x) * w).sum()), x)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8)

    def test_single_vector_matches_batch(self):
        x = np.array([[0.3, -1.0, 2.0, 0.7]])
        np.testing.assert_array_equal(mvn_normalize(x[0]), mvn_normalize(x)[0])


class TestDropout:
    def test_identity_cases(self):
        x = np.arange(5.0)
        assert dropout(x, 0.0, make_rng(0))[0] is x
        out, mask = dropout(x, 0.5, make_rng(0), training=False)
        assert out is x and mask is None

    def test_law_of_large_numbers(self):
        rng = make_rng(11)
        x = rng.random(10000) + 0.5
        out, mask = dropout(x, 0.5, rng)
        kept = (mask > 0).mean()
        assert abs(kept - 0.5) < 0.02
        # mean of x*mask has std sqrt(E[x^2]) / sqrt(n) for rate 0.5
        sigma = np.sqrt((x ** 2).mean() / x.size)
        assert abs(out.mean() - x.mean()) < 3 * sigma

    def test_rate_bounds(self):
        for rate in (-0.1, 1.0):
            with pytest.raises(ValueError):
                dropout(np.ones(3), rate, make_rng(0))

    def test_training_needs_rng(self):
        with pytest.raises(ValueError):
            dropout(np.ones(3), 0.5, None)


class TestInitAndRng:
    def test_xavier_variance_and_bounds(self):
        m = xavier_init(500, 500, make_rng(1), np.float64)
        expect = 2.0 / 1000
        assert abs(m.var() - expect) / expect < 0.1
        limit = np.sqrt(6.0 / 1000)
        assert m.min() >= -limit and m.max() <= limit

    def test_xavier_deterministic(self):
        np.testing.assert_array_equal(xavier_init(4, 3, make_rng(5)), xavier_init(4, 3, make_rng(5)))

    def test_rng_streams(self):
        assert make_rng(9).integers(0, 2**62, 5).tolist() == make_rng(9).integers(0, 2**62, 5).tolist()
        assert make_rng(9).random() != make_rng(10).random()

    @settings(max_examples=10)
    @given(st.sampled_from([32, 64]))
    def test_float_dtype(self, bits):
        assert np.dtype(float_dtype(bits)).itemsize * 8 == bits

    def test_float_dtype_rejects(self):
        with pytest.raises(ValueError):
            float_dtype(16)
