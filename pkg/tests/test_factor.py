import itertools
import math

import numpy as np
import pytest

import oracles
from stochws.exceptions import DataError, DegenerateError
from stochws.factor import (
    FactorImage,
    axis_diagnostics,
    axis_snr,
    covariance_origin,
    fca_fit_transform,
    fca_reconstruct,
    select_axes,
    spatial_covariance,
)
from stochws.raster import MultispectralImage


def _random_image(rng, L=3, h=6, w=6):
    return MultispectralImage(rng.uniform(0.5, 10.0, (L, h, w)))


def test_chi2_isometry_6x6x3():
    img = _random_image(np.random.default_rng(0))
    F = fca_fit_transform(img).full_coords()
    w = img.width
    for p, q in itertools.combinations(range(36), 2):
        d_ref = oracles.chi2_distance(img.data, divmod(p, w), divmod(q, w))
        d = np.linalg.norm(F[p] - F[q])
        assert abs(d - d_ref) <= 1e-8 * max(d_ref, 1e-300)


def test_eigenvalues_sum_to_table_inertia():
    rng = np.random.default_rng(1)
    img = _random_image(rng, L=5, h=7, w=4)
    fi = fca_fit_transform(img)
    ref = oracles.table_inertia(img.table())
    assert math.isclose(fi.eigenvalues.sum(), ref, rel_tol=1e-10)
    assert math.isclose(fi.total_inertia, ref, rel_tol=1e-10)
    assert math.isclose(fi.inertias.sum(), 1.0, rel_tol=1e-10)
    assert np.all(np.diff(fi.eigenvalues) <= 1e-15)


def test_rank_one_table_has_zero_factors():
    spectrum = np.array([1.0, 2.0, 5.0])
    scale = np.random.default_rng(2).uniform(1, 4, (5, 5))
    img = MultispectralImage(spectrum[:, None, None] * scale[None])
    fi = fca_fit_transform(img)
    assert fi.total_inertia < 1e-28
    assert np.abs(fi.coords).max() < 1e-12


def test_planes_uncorrelated_under_row_mass_weights():
    # correspondence analysis decorrelates axes under the pixel-mass weighting
    fi = fca_fit_transform(_random_image(np.random.default_rng(3), L=4, h=9, w=9))
    F = fi.full_coords()
    r = fi.row_mass
    assert np.allclose(r @ F, 0, atol=1e-12)  # weighted means vanish
    G = (F * r[:, None]).T @ F
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() < 1e-12
    np.testing.assert_allclose(np.diag(G), fi.eigenvalues, rtol=1e-10)


def test_sign_convention_deterministic():
    img = _random_image(np.random.default_rng(4), L=4)
    fi = fca_fit_transform(img)
    for k in range(fi.n_computed):
        v = fi.right[:, k]
        assert v[np.argmax(np.abs(v))] > 0


def test_k_clamped_with_warning():
    img = _random_image(np.random.default_rng(5), L=3)
    with pytest.warns(UserWarning):
        fi = fca_fit_transform(img, K=7)
    assert fi.n_axes == 2
    assert fca_fit_transform(img, K=1).n_axes == 1


def test_zero_sum_errors_name_location():
    data = np.ones((3, 4, 4))
    data[:, 1, 2] = 0
    with pytest.raises(DataError, match=r"row=1, col=2"):
        fca_fit_transform(MultispectralImage(data))
    data = np.ones((3, 4, 4))
    data[1] = 0
    with pytest.raises(DataError, match="channel 1"):
        fca_fit_transform(MultispectralImage(data))


def test_reconstruct_all_and_none():
    img = _random_image(np.random.default_rng(6), L=4, h=8, w=8)
    fi = fca_fit_transform(img)
    full = fca_reconstruct(fi, range(1, fi.n_computed + 1))
    np.testing.assert_allclose(full.data, img.data, rtol=1e-6)
    indep = fca_reconstruct(fi, [])
    X = img.table()
    ref = np.outer(X.sum(1), X.sum(0)) / X.sum()
    np.testing.assert_allclose(indep.table(), ref, rtol=1e-12)
    with pytest.raises(DataError):
        fca_reconstruct(fi, [4])


def test_reconstruct_subset_matches_truncated_decomposition():
    img = _random_image(np.random.default_rng(7), L=4, h=8, w=8)
    fi = fca_fit_transform(img)
    X = img.table()
    n = X.sum()
    P = X / n
    r, c = P.sum(1), P.sum(0)
    S = (P - np.outer(r, c)) / np.sqrt(np.outer(r, c))
    U, s, Vt = np.linalg.svd(S, full_matrices=False)
    s = s.copy()
    s[[1, 3]] = 0  # zero eigenvalues 2 and 4
    ref = (np.outer(r, c) + np.sqrt(np.outer(r, c)) * ((U * s) @ Vt)) * n
    got = fca_reconstruct(fi, [1, 3]).table()
    np.testing.assert_allclose(got, np.clip(ref, 0, None), rtol=1e-9, atol=1e-9)


def test_save_load_roundtrip(tmp_path):
    fi = fca_fit_transform(_random_image(np.random.default_rng(8))).with_retained([2])
    fi.save(tmp_path / "f.npz")
    back = FactorImage.load(tmp_path / "f.npz")
    np.testing.assert_array_equal(back.coords, fi.coords)
    assert back.retained == (2,)
    np.testing.assert_array_equal(back.retained_weights(), [1.0])


# --------------------------------------------------------------------------
# covariance and SNR


def test_covariance_constant_plane():
    assert not spatial_covariance(np.full((8, 8), 3.0)).any()


def test_covariance_matches_direct_oracle():
    plane = np.random.default_rng(9).normal(size=(16, 16))
    g = spatial_covariance(plane)
    ref = np.fft.fftshift(oracles.circular_covariance(plane))
    np.testing.assert_allclose(g, ref, atol=1e-12)


def test_covariance_of_iid_noise():
    sigma = 2.0
    plane = np.random.default_rng(10).normal(0, sigma, (128, 128))
    g = spatial_covariance(plane)
    o = covariance_origin(g.shape)
    assert abs(g[o] - sigma ** 2) < 0.05 * sigma ** 2
    off = g.copy()
    off[o] = 0
    assert np.abs(off).max() < 5 * sigma ** 2 / math.sqrt(plane.size)


def test_covariance_of_cosine():
    T = 8
    i = np.arange(32)
    plane = np.repeat(np.cos(2 * np.pi * i / T)[:, None], 16, axis=1)
    g = spatial_covariance(plane)
    o = covariance_origin(g.shape)
    lags = np.arange(32) - o[0]
    np.testing.assert_allclose(g[:, o[1]], 0.5 * np.cos(2 * np.pi * lags / T), atol=1e-12)


def test_snr_noise_and_smooth():
    rng = np.random.default_rng(11)
    noise = axis_snr(rng.normal(size=(128, 128)))
    assert noise.snr < 0.2
    ii, jj = np.mgrid[0:64, 0:64]
    smooth = axis_snr(np.sin(2 * np.pi * ii / 64) + np.cos(2 * np.pi * jj / 64))
    assert smooth.snr > 1
    lin = axis_snr(np.cos(2 * np.pi * ii / 64))
    assert lin.var_signal + lin.var_noise == pytest.approx(lin.covariance[covariance_origin((64, 64))], rel=1e-9)


def test_snr_matches_brute_force_opening():
    plane = np.random.default_rng(12).normal(size=(16, 16)) + np.linspace(0, 3, 16)[None]
    d = axis_snr(plane)
    g = np.fft.fftshift(oracles.circular_covariance(plane))
    o = covariance_origin(g.shape)
    opened = oracles.opening(g, oracles.square_offsets(3))[o]
    assert d.var_signal == pytest.approx(max(opened, 0.0), rel=1e-9)
    assert d.snr == pytest.approx(max(opened, 0) / (g[o] - max(opened, 0)), rel=1e-9)


def test_snr_flags(monkeypatch):
    flat = axis_snr(np.full((8, 8), 1.0))
    assert flat.degenerate and math.isnan(flat.snr)
    ii, jj = np.mgrid[0:64, 0:64]
    smooth = axis_snr(np.cos(2 * np.pi * ii / 64))
    assert smooth.var_noise < 0.01 * smooth.var_signal and smooth.snr > 100
    # an opening that keeps the origin peak leaves no noise: infinite SNR
    import stochws.factor as factor
    monkeypatch.setattr(factor, "opening", lambda g, se: g)
    d = factor.axis_snr(np.cos(2 * np.pi * ii / 64))
    assert d.snr == math.inf and d.var_noise == 0.0


def test_select_axes_examples():
    assert select_axes([5.10, 0.03, 2.84, 0.47]) == [1, 3]
    assert select_axes([3.0, 2.0]) == [1, 2]
    assert select_axes([math.inf, math.nan, 1.0]) == [1, 3]
    with pytest.raises(DegenerateError):
        select_axes([0.5, 0.2])


def test_low_inertia_axis_kept_over_noisy_axis():
    h = w = 128
    ii, jj = np.mgrid[0:h, 0:w]
    rng = np.random.default_rng(5)
    strong = np.sin(2 * np.pi * ii / 64) * np.cos(2 * np.pi * jj / 64)
    weak = np.cos(2 * np.pi * (ii + jj) / 32)
    noise = rng.normal(size=(h, w))
    u1, u2, u3 = (np.array(v) / 2 for v in ([1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]))
    data = (100 + 40 * strong[None] * u1[:, None, None] + 10 * noise[None] * u2[:, None, None]
            + 6 * weak[None] * u3[:, None, None])
    fi = fca_fit_transform(MultispectralImage(data))
    diags = axis_diagnostics(fi)
    assert fi.inertias[1] > fi.inertias[2]
    assert diags[1].snr < 1 < diags[2].snr
    assert select_axes(diags) == [1, 3]
