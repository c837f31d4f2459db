import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from ghostspec.detection import (
    DetectorConfig,
    LambdaYMap,
    bin_indices,
    bin_signal,
    merge_maps,
    simulate_acquisition,
)
from ghostspec.scene import Blank, Neutral, SceneMask
from ghostspec.source import PairEvent, SourceConfig

from oracles import binomial_z, flatness_pvalue

DET = DetectorConfig()
SRC = SourceConfig()
BLANK = SceneMask.uniform(Blank())


def ev(lam, y=0.0):
    return PairEvent(lam, 810.0, y, y, 0.0, 0.0)


def test_bin_endpoints_and_midpoint():
    assert bin_signal(ev(DET.lambda_min), DET) == (0, 64)
    assert bin_signal(ev(np.nextafter(DET.lambda_max, 0)), DET)[0] == 255
    # floor(256 * 40 / 80) = 128
    assert bin_signal(ev(810.0), DET)[0] == 128
    assert bin_signal(ev(DET.lambda_max), DET) is None
    assert bin_signal(ev(DET.lambda_min - 1e-9), DET) is None
    assert bin_signal(ev(810.0, y=1.5), DET) is None
    assert bin_signal(ev(810.0, y=-1.5), DET) == (128, 0)


def test_iccd_magnification_scales_position():
    det = replace(DET, iccd_magnification=2.0)
    # 0.5 mm at the crystal lands at 1.0 mm: floor(128 * 2.5 / 3)
    assert bin_signal(ev(810.0, 0.5), det)[1] == 106
    assert bin_signal(ev(810.0, 0.8), det) is None


def test_bin_indices_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    lam = rng.uniform(760, 860, 500)
    y = rng.uniform(-2, 2, 500)
    s, r, ok = bin_indices(lam, y, DET)
    for i in range(500):
        got = bin_signal(ev(lam[i], y[i]), DET)
        assert got == ((s[i], r[i]) if ok[i] else None)


@pytest.mark.parametrize("field,value", [
    ("bucket_efficiency", 1.1), ("signal_path_efficiency", -0.1), ("n_spectral_pixels", 1),
    ("lambda_min", 900.0), ("y_max", -2.0), ("iccd_magnification", 0.0), ("dark_rate_per_pixel", -1.0),
])
def test_invalid_detector(field, value):
    with pytest.raises(ValueError):
        replace(DET, **{field: value})


def test_zero_bucket_efficiency_gives_empty_map():
    det = replace(DET, bucket_efficiency=0.0, dark_rate_per_pixel=0.0)
    m = simulate_acquisition(SRC, BLANK, det, 10.0, seed=1)
    assert m.total == 0 and m.shape == (128, 256)


@pytest.mark.parametrize("duration", [0.0, -1.0, math.inf, math.nan])
def test_rejects_bad_duration(duration):
    with pytest.raises(ValueError):
        simulate_acquisition(SRC, BLANK, DET, duration, seed=1)


def test_perfect_efficiency_counts_every_in_range_pair():
    det = replace(DET, bucket_efficiency=1.0, signal_path_efficiency=1.0, dark_rate_per_pixel=0.0,
                  lambda_min=400.0, lambda_max=1300.0, y_min=-20.0, y_max=20.0)
    m = simulate_acquisition(SRC, BLANK, det, 30.0, seed=3)
    assert m.total == int(m.metadata["n_pairs"])


def in_range_fraction(src, det):
    s = src.spectral_sigma
    trunc = 1 - stats.norm.cdf(src.pump_wavelength, src.center_signal_wavelength, s)
    pl = (stats.norm.cdf(det.lambda_max, src.center_signal_wavelength, s)
          - stats.norm.cdf(det.lambda_min, src.center_signal_wavelength, s)) / trunc
    sy = src.transverse_sigma * det.iccd_magnification
    py = stats.norm.cdf(det.y_max, 0, sy) - stats.norm.cdf(det.y_min, 0, sy)
    return pl * py


def test_expected_total_matches_formula():
    det = replace(DET, dark_rate_per_pixel=0.0)
    duration = 200.0
    m = simulate_acquisition(SRC, SceneMask.uniform(Neutral(0.7)), det, duration, seed=11)
    mean = SRC.pair_rate * duration * 0.7 * det.bucket_efficiency * det.signal_path_efficiency
    mean *= in_range_fraction(SRC, det)
    assert mean > 1e4
    assert abs(m.total - mean) < 5 * math.sqrt(mean)


def test_blank_vs_neutral_ratio():
    src = replace(SRC, pair_rate=20000.0)
    det = replace(DET, dark_rate_per_pixel=0.0)
    a = simulate_acquisition(src, BLANK, det, 30.0, seed=21).total
    b = simulate_acquisition(src, SceneMask.uniform(Neutral(0.5)), det, 30.0, seed=22).total
    assert a > 1e4
    # given the sum, b ~ Binomial(a + b, 1/3) when the rates are in ratio 0.5
    assert abs(binomial_z(b, a + b, 1 / 3)) < 5


def test_nd_half_scene_ratio_and_flatness():
    src = replace(SRC, pair_rate=20000.0)
    det = replace(DET, dark_rate_per_pixel=0.0)
    mask = SceneMask.split(0.0, Blank(), Neutral(0.5))
    m = simulate_acquisition(src, mask, det, 60.0, seed=5)
    # rows 0..61 lie wholly below and 66..127 wholly above y = 0 (ICCD row 64)
    lower = m.counts[:62].sum(axis=0)
    upper = m.counts[66:].sum(axis=0)
    assert upper.sum() > 1e4
    assert abs(binomial_z(upper.sum(), upper.sum() + lower.sum(), 1 / 3)) < 5
    assert flatness_pvalue(upper, lower) > 0.01


def test_dark_counts_uniform():
    det = replace(DET, bucket_efficiency=0.0, dark_rate_per_pixel=0.01)
    m = simulate_acquisition(SRC, BLANK, det, 100.0, seed=9)
    expected = 0.01 * 100.0 * m.counts.size
    assert abs(m.total - expected) < 5 * math.sqrt(expected)
    # one-count-per-pixel mean: compare row and column sums to uniform
    for sums in (m.counts.sum(axis=0), m.counts.sum(axis=1)):
        assert stats.chisquare(sums).pvalue > 0.01


def test_determinism_and_worker_independence():
    src = replace(SRC, pair_rate=1_500_000.0)  # three chunks
    a = simulate_acquisition(src, BLANK, DET, 2.0, seed=4, workers=1)
    b = simulate_acquisition(src, BLANK, DET, 2.0, seed=4, workers=3)
    assert int(a.metadata["n_pairs"]) > 2 * (1 << 20)
    assert a == b
    assert a != simulate_acquisition(src, BLANK, DET, 2.0, seed=5)


def test_merge_identity_and_commutativity():
    a = simulate_acquisition(SRC, BLANK, DET, 5.0, seed=1)
    b = simulate_acquisition(SRC, BLANK, DET, 7.0, seed=2)
    assert merge_maps(a, LambdaYMap.zeros(DET)) == a
    assert merge_maps(LambdaYMap.zeros(DET), a) == a
    ab, ba = merge_maps(a, b), merge_maps(b, a)
    assert ab == ba
    assert ab.acquisition_time == 12.0
    assert np.array_equal(ab.counts, a.counts + b.counts)


def test_merge_rejects_other_calibration():
    other = LambdaYMap.zeros(replace(DET, lambda_max=860.0))
    with pytest.raises(ValueError):
        merge_maps(LambdaYMap.zeros(DET), other)


def test_two_halves_match_full_run():
    full = simulate_acquisition(SRC, BLANK, DET, 200.0, seed=30).total
    half = merge_maps(simulate_acquisition(SRC, BLANK, DET, 100.0, seed=31),
                      simulate_acquisition(SRC, BLANK, DET, 100.0, seed=32)).total
    # difference of two independent Poisson variables with equal means
    assert full > 1e4
    assert abs(full - half) < 5 * math.sqrt(full + half)


def test_map_validation():
    with pytest.raises(ValueError):
        LambdaYMap(np.zeros((2, 3)), [1.0, 2.0], [0.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        LambdaYMap(-np.ones((2, 2)), [1.0, 2.0], [0.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        LambdaYMap(np.zeros((2, 2)), [2.0, 1.0], [0.0, 1.0], 1.0)
