import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dehazegan.priors import (
    gaussian_kernel1d,
    high_freq,
    laplacian,
    low_freq,
    make_prior_pair,
    normalize_minmax,
)

seeds = st.integers(0, 2**32 - 1)


def test_kernel_normalized_and_symmetric():
    k = gaussian_kernel1d()
    assert k.shape == (7,) and abs(k.sum() - 1) < 1e-15
    np.testing.assert_array_equal(k, k[::-1])


def test_constant_image():
    img = np.full((12, 10, 3), 0.37)
    np.testing.assert_allclose(low_freq(img), 0.37, atol=1e-15)
    assert (high_freq(img) == 0).all()


def test_impulse_response_is_outer_product():
    img = np.zeros((21, 21, 3))
    img[10, 10] = 1.0
    sigma = 1.5
    x = np.arange(-3, 4)
    g = np.exp(-(x**2) / (2 * sigma**2))
    g /= g.sum()
    out = low_freq(img)
    np.testing.assert_allclose(out[7:14, 7:14, 1], np.outer(g, g), atol=1e-15)
    assert out[:7].max() == 0 and out[14:].max() == 0


@given(seeds)
@settings(max_examples=30)
def test_low_freq_within_input_range(seed):
    img = np.random.default_rng(seed).uniform(0.2, 0.7, size=(9, 11, 3))
    out = low_freq(img)
    assert out.min() >= img.min() - 1e-15 and out.max() <= img.max() + 1e-15


def test_ramp_has_zero_interior_laplacian():
    yy, xx = np.mgrid[0:10, 0:12]
    img = np.repeat(((0.3 * xx + 0.2 * yy) / 6.0)[..., None], 3, axis=2)
    lap = laplacian(img)
    np.testing.assert_allclose(lap[1:-1, 1:-1], 0, atol=1e-14)


def test_checkerboard():
    yy, xx = np.mgrid[0:10, 0:10]
    board = (((yy // 2) + (xx // 2)) % 2).astype(float)
    img = np.repeat(board[..., None], 3, axis=2)
    lap = laplacian(img)[1:-1, 1:-1, 0]
    # each pixel of a 2x2 block has exactly two opposite-coloured 4-neighbours
    assert np.unique(np.abs(lap)).tolist() == [2.0]
    hf = high_freq(img)[1:-1, 1:-1]
    assert set(np.unique(hf)) <= {0.0, 1.0}


@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30)
def test_raw_filters_are_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(size=(2, 9, 8, 3)) * 0.1
    # keep the combination inside [0, 1] so the image checks accept it
    combo = 0.5 + (a * x + b * y) / 10
    base = np.full_like(x, 0.5)
    lhs = laplacian(combo)
    rhs = laplacian(base) + (a * laplacian(x) + b * laplacian(y)) / 10
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    lf_lhs = low_freq(combo) - low_freq(base)
    lf_rhs = (a * low_freq(x) + b * low_freq(y)) / 10
    np.testing.assert_allclose(lf_lhs, lf_rhs, atol=1e-12)


def test_shift_covariance_in_interior():
    img = np.random.default_rng(3).uniform(size=(20, 20, 3))
    shifted = np.roll(img, (1, 1), axis=(0, 1))
    np.testing.assert_allclose(laplacian(shifted)[5:15, 5:15], laplacian(img)[4:14, 4:14], atol=1e-14)
    np.testing.assert_allclose(low_freq(shifted)[5:15, 5:15], low_freq(img)[4:14, 4:14], atol=1e-14)


def test_normalization_idempotent():
    hf = high_freq(np.random.default_rng(4).uniform(size=(9, 9, 3)))
    np.testing.assert_array_equal(normalize_minmax(hf), hf)
    assert hf.min() == 0 and hf.max() == 1


@given(seeds)
@settings(max_examples=20)
def test_prior_pair_layout(seed):
    img = np.random.default_rng(seed).uniform(size=(10, 13, 3))
    pair = make_prior_pair(img)
    assert pair.lf_input.shape == pair.hf_input.shape == (10, 13, 6)
    np.testing.assert_array_equal(pair.lf_input[..., :3], img)
    np.testing.assert_array_equal(pair.hf_input[..., :3], img)
    np.testing.assert_array_equal(pair.lf_input[..., 3:], low_freq(img))
    np.testing.assert_array_equal(pair.hf_input[..., 3:], high_freq(img))
    assert 0 <= pair.hf_input.min() and pair.lf_input.max() <= 1
