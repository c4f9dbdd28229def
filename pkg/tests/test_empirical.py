import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guarantee_pi.empirical import RngStream, ecdf, quantile, resample
from guarantee_pi.exceptions import AlphaOutOfRange

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
samples = st.lists(finite, min_size=1, max_size=60)
levels = st.floats(min_value=1e-6, max_value=1.0)


def scan_quantile(s, alpha):
    """``inf{x in s : ecdf(s, x) >= alpha}`` by linear scan."""
    return min(x for x in s if ecdf(s, x) >= alpha)


class TestECDF:
    def test_direct_count(self):
        assert ecdf([1, 2, 3, 4], 2.5) == 0.5

    def test_total_mass(self):
        assert ecdf([3.0, -1.0, 7.5], math.inf) == 1.0

    def test_normal_median(self):
        s = RngStream(11).generator.standard_normal(1000)
        assert abs(ecdf(s, 0.0) - 0.5) < 0.05

    @given(samples, finite, finite)
    def test_monotone(self, s, a, b):
        lo, hi = min(a, b), max(a, b)
        assert ecdf(s, lo) <= ecdf(s, hi)


class TestQuantile:
    def test_inf_definition(self):
        assert quantile([1, 2, 3, 4], 0.5) == 2

    def test_maximum(self):
        assert quantile([1, 2, 3, 4], 1.0) == 4

    def test_matches_scan(self):
        g = np.random.default_rng(5)
        s = g.standard_normal(37)
        assert quantile(s, 0.95) == scan_quantile(s, 0.95)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5, float("nan")])
    def test_out_of_range(self, alpha):
        with pytest.raises(AlphaOutOfRange):
            quantile([1.0, 2.0], alpha)

    def test_rounding_edge(self):
        # 1 - 0.05 is not exactly 0.95; index must follow the float ECDF
        s = np.arange(1.0, 1001.0)
        assert quantile(s, 1 - 0.05) == scan_quantile(s, 1 - 0.05)
        assert quantile(s, 0.7) == scan_quantile(s, 0.7)

    @settings(max_examples=200)
    @given(samples, levels)
    def test_galois(self, s, alpha):
        q = quantile(s, alpha)
        assert q in s
        assert ecdf(s, q) >= alpha
        below = [x for x in s if x < q]
        if below:
            assert ecdf(s, max(below)) < alpha
        assert q == scan_quantile(s, alpha)

    @given(samples, levels, levels)
    def test_monotone_in_level(self, s, a, b):
        lo, hi = min(a, b), max(a, b)
        assert quantile(s, lo) <= quantile(s, hi)


class TestResample:
    def test_singleton(self):
        assert resample([7.0], 5, RngStream(1)).tolist() == [7.0] * 5

    def test_deterministic(self):
        s = np.arange(10.0)
        a = resample(s, 50, RngStream(3, 4))
        b = resample(s, 50, RngStream(3, 4))
        assert a.tobytes() == b.tobytes()

    def test_streams_differ(self):
        s = np.arange(10.0)
        assert not np.array_equal(resample(s, 50, RngStream(3, 4)), resample(s, 50, RngStream(3, 5)))

    def test_frequencies(self):
        s = np.arange(10.0)
        draws = resample(s, 100_000, RngStream(2024))
        freq = np.bincount(draws.astype(int), minlength=10) / draws.size
        assert np.all(np.abs(freq - 0.1) < 0.01)

    @given(samples, st.integers(min_value=1, max_value=50), st.integers(min_value=0, max_value=2**64 - 1))
    def test_values_subset(self, s, count, seed):
        out = resample(s, count, RngStream(seed))
        assert set(out.tolist()) <= set(s)

    def test_substream_independent_of_consumption(self):
        parent = RngStream(9)
        parent.generator.integers(0, 10, 100)
        assert np.array_equal(
            parent.substream(2).generator.integers(0, 1000, 20),
            RngStream(9).substream(2).generator.integers(0, 1000, 20),
        )
