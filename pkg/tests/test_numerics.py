"""Dense kernels against brute-force loop oracles."""

import numpy as np
import pytest

from reverb_snn.errors import DimensionError
from reverb_snn.numerics import conv2d, conv_output_size, matmul


def matmul_oracle(a, b):
    """Triple-loop reference product."""
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for kk in range(k):
                out[i, j] += a[i, kk] * b[kk, j]
    return out


def conv2d_oracle(x, w, stride, padding):
    """Direct six-loop convolution (cross-correlation) reference."""
    c_in, h, win = x.shape
    c_out, _, k, _ = w.shape
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (win + 2 * padding - k) // stride + 1
    xp = np.zeros((c_in, h + 2 * padding, win + 2 * padding))
    xp[:, padding : padding + h, padding : padding + win] = x
    out = np.zeros((c_out, h_out, w_out))
    for co in range(c_out):
        for oy in range(h_out):
            for ox in range(w_out):
                for ci in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            out[co, oy, ox] += (
                                xp[ci, oy * stride + ky, ox * stride + kx]
                                * w[co, ci, ky, kx]
                            )
    return out


class TestMatmul:
    def test_identity_right(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(a, np.eye(2)), a)

    def test_identity_left(self):
        b = np.array([[5.0], [7.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), b), b)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(-1, 1, (3, 4))
        b = rng.uniform(-1, 1, (4, 2))
        np.testing.assert_allclose(matmul(a, b), matmul_oracle(a, b), atol=1e-12)

    def test_oracle_agreement_random_shapes(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m, k, n = rng.integers(1, 9, 3)
            a = rng.uniform(-1, 1, (m, k))
            b = rng.uniform(-1, 1, (k, n))
            np.testing.assert_allclose(matmul(a, b), matmul_oracle(a, b), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(np.zeros((2, 3)), np.zeros((4, 2)))

    def test_deterministic_bitwise(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(-1, 1, (6, 17))
        b = rng.uniform(-1, 1, (17, 5))
        np.testing.assert_array_equal(matmul(a, b), matmul(a, b))


class TestConv2d:
    def test_zero_kernels_zero_output(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (2, 5, 5))
        out = conv2d(x, np.zeros((3, 2, 3, 3)), 1, 1)
        np.testing.assert_array_equal(out, np.zeros_like(out))

    def test_unit_1x1_kernel_sums_channels(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, (3, 4, 4))
        out = conv2d(x, np.ones((1, 3, 1, 1)), 1, 0)
        np.testing.assert_allclose(out[0], x.sum(axis=0), atol=1e-12)

    def test_matches_six_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, (2, 5, 5))
        w = rng.uniform(-1, 1, (3, 2, 3, 3))
        np.testing.assert_allclose(conv2d(x, w, 1, 0), conv2d_oracle(x, w, 1, 0), atol=1e-12)

    def test_oracle_agreement_stride_padding_grid(self):
        rng = np.random.default_rng(7)
        for stride in (1, 2):
            for padding in (0, 1, 2):
                x = rng.uniform(-1, 1, (2, 6, 7))
                w = rng.uniform(-1, 1, (3, 2, 3, 3))
                got = conv2d(x, w, stride, padding)
                want = conv2d_oracle(x, w, stride, padding)
                np.testing.assert_allclose(got, want, atol=1e-12)

    def test_output_shape_formula(self):
        rng = np.random.default_rng(9)
        for h, w, k, stride, padding in [
            (5, 5, 3, 1, 0), (6, 8, 3, 2, 1), (7, 7, 1, 1, 0),
            (8, 8, 5, 2, 2), (9, 4, 3, 3, 1), (4, 4, 4, 1, 0),
        ]:
            x = rng.uniform(-1, 1, (1, h, w))
            kern = rng.uniform(-1, 1, (2, 1, k, k))
            out = conv2d(x, kern, stride, padding)
            assert out.shape == (
                2,
                conv_output_size(h, k, stride, padding),
                conv_output_size(w, k, stride, padding),
            )

    def test_batched_matches_per_sample(self):
        rng = np.random.default_rng(13)
        x = rng.uniform(-1, 1, (4, 2, 5, 5))
        w = rng.uniform(-1, 1, (3, 2, 3, 3))
        batched = conv2d(x, w, 2, 1)
        for i in range(4):
            np.testing.assert_array_equal(batched[i], conv2d(x[i], w, 2, 1))

    def test_kernel_larger_than_padded_input(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 3, 3)), np.zeros((1, 1, 5, 5)), 1, 0)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((2, 5, 5)), np.zeros((1, 3, 3, 3)), 1, 0)

    def test_bad_stride(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 5, 5)), np.zeros((1, 1, 3, 3)), 0, 0)
