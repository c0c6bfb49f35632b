import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chewdetect import features as F
from chewdetect.errors import ValidationError
from chewdetect.preprocessing import normalize_frames

FS = 16000


def test_katz_ramp_is_one():
    assert F.katz_fractal_dimension(np.linspace(0, 1, 3200)) == 1.0


def test_katz_rougher_is_higher(rng):
    smooth = F.katz_fractal_dimension(np.sin(np.linspace(0, 6, 3200)))
    rough = F.katz_fractal_dimension(rng.standard_normal(3200))
    assert 1.0 <= smooth < rough


def test_skewness_example():
    assert F.skewness([0, 0, 0, 1]) == pytest.approx(2 / np.sqrt(3), abs=1e-9)
    assert F.skewness(np.zeros(5)) == 0.0


def test_kurtosis_gaussian(rng):
    assert abs(F.kurtosis(rng.standard_normal(200000))) < 0.05


def test_zcr_alternating():
    assert F.zero_crossing_rate([1, -1, 1, -1, 1]) == 1.0
    assert F.zero_crossing_rate([1, 2, 3]) == 0.0


def test_higuchi_ranges(rng):
    # smooth curve close to 1, white noise close to 2
    assert F.higuchi_fractal_dimension(np.sin(np.linspace(0, 6, 3200))) == pytest.approx(1.0, abs=0.05)
    assert F.higuchi_fractal_dimension(rng.standard_normal(3200)) == pytest.approx(2.0, abs=0.1)
    with pytest.raises(ValidationError):
        F.higuchi_fractal_dimension(np.zeros(10), kmax=10)


def test_condition_number_white_noise_small(rng):
    assert F.autocorr_condition_number(rng.standard_normal(3200)) < 0.2


def test_condition_number_clamps_on_silence():
    assert F.autocorr_condition_number(np.zeros(3200)) == 12.0


def test_condition_number_sine_large(rng):
    t = np.arange(3200) / FS
    sine = F.autocorr_condition_number(np.sin(2 * np.pi * 440 * t))
    assert sine > 5.0
    assert sine > 20 * F.autocorr_condition_number(rng.standard_normal(3200))


def test_autocorr_matrix_toeplitz(rng):
    R = F.autocorr_matrix(rng.standard_normal(400), 6)
    assert R.shape == (6, 6)
    np.testing.assert_allclose(R, R.T)
    assert np.allclose(np.diag(R, 2), R[0, 2])


def test_spectral_features_on_tone():
    t = np.arange(3200) / FS
    freqs, P = F.power_spectrum(np.sin(2 * np.pi * 2000 * t), FS)
    assert len(freqs) == F.fft_length(3200) // 2 + 1 == 2049
    assert F.spectral_centroid(freqs, P) == pytest.approx(2000, abs=20)
    assert F.spectral_rolloff(freqs, P) == pytest.approx(2000, abs=20)
    assert F.spectral_flatness(P) < 0.01
    ratios = F.band_log_ratios(freqs, P, F.DEFAULT_BANDS, FS)
    assert np.argmax(ratios) == 2


def test_flatness_white_noise(rng):
    _, P = F.power_spectrum(rng.standard_normal(3200), FS)
    assert F.spectral_flatness(P) > 0.4


def test_compiled_path_matches_reference(rng):
    X = rng.standard_normal((8, 3200)) * np.linspace(0.5, 3, 3200) + rng.standard_normal((8, 1))
    norm, deg = normalize_frames(X)
    got = F.compute_features(norm, FS)
    names = F.FeatureConfig().names
    ref = {
        "log_energy": F.log_energy(norm), "zcr": F.zero_crossing_rate(norm),
        "skewness": F.skewness(norm), "kurtosis": F.kurtosis(norm),
        "fractal_dim": F.katz_fractal_dimension(norm),
        "log_cond": F.autocorr_condition_number(norm, 10),
    }
    for k, v in ref.items():
        np.testing.assert_allclose(got[:, names.index(k)], v, rtol=1e-9, atol=1e-12)


def test_feature_config():
    cfg = F.FeatureConfig(enabled=("zcr", "log_energy"))
    assert cfg.names == ("log_energy", "zcr")
    with pytest.raises(ValidationError):
        F.FeatureConfig(enabled=("nope",))
    with pytest.raises(ValidationError):
        F.FeatureConfig(fd_method="box")
    custom = F.FeatureConfig(bands=((0, 500), (500, 8000)))
    assert custom.names[-2:] == ("band_0_500", "band_500_8000")


def test_degenerate_rows_are_zero():
    norm, deg = normalize_frames(np.zeros((3, 3200)))
    out = F.compute_features(norm, FS, degenerate=deg)
    assert deg.all() and not out.any()


def test_channel_extraction_shapes(rng):
    x = rng.standard_normal(FS)
    x[:4000] = 0
    starts, values, deg = F.extract_channel_features(x, FS, 0.2, 0.05, chunk=4)
    assert len(starts) == len(values) == len(deg) == 17
    assert deg[:2].all() and not deg[-1]
    assert values.shape[1] == 13
    assert not values[deg].any()


@given(arrays(np.float64, 400, elements=st.floats(-1, 1)), st.floats(0.01, 100))
@settings(max_examples=60, deadline=None)
def test_scale_invariance_property(x, scale):
    norm1, d1 = normalize_frames(x[None, :])
    norm2, d2 = normalize_frames(scale * x[None, :])
    if d1[0] or d2[0]:
        return
    cfg = F.FeatureConfig(bands=((0, 500), (500, 8000)))
    a = F.compute_features(norm1, FS, cfg)
    b = F.compute_features(norm2, FS, cfg)
    np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-7)
