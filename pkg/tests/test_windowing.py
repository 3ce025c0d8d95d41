import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowsentry.errors import InsufficientDataError, ParameterError
from flowsentry.windowing import (
    WindowConfig,
    coverage_counts,
    make_windows,
    windows_containing,
)


def matrix(n, m=2):
    return np.arange(n * m, dtype=float).reshape(n, m)


class TestWindowConfig:
    def test_defaults(self):
        cfg = WindowConfig()
        assert cfg.timesteps == 10 and cfg.stride == 1

    def test_rejects_bad_values(self):
        with pytest.raises(ParameterError):
            WindowConfig(timesteps=0)
        with pytest.raises(ParameterError):
            WindowConfig(timesteps=5, stride=2)


class TestMakeWindows:
    def test_five_rows_window_three(self):
        batch = make_windows(matrix(5), WindowConfig(3))
        assert batch.windows == 3
        assert np.array_equal(batch.data[0], matrix(5)[0:3])
        assert np.array_equal(batch.data[2], matrix(5)[2:5])
        assert batch.origin.tolist() == [0, 1, 2]

    def test_n_equals_t_gives_one_window(self):
        batch = make_windows(matrix(4), WindowConfig(4))
        assert batch.windows == 1

    def test_hundred_rows_window_ten(self):
        batch = make_windows(matrix(100), WindowConfig(10))
        assert batch.windows == 91

    def test_too_few_rows_reports_both_sizes(self):
        with pytest.raises(InsufficientDataError, match="10.*got 4|4.*10"):
            make_windows(matrix(4), WindowConfig(10))

    def test_windows_are_plain_copies_of_rows(self):
        x = matrix(7, 3)
        batch = make_windows(x, WindowConfig(4))
        for k in range(batch.windows):
            for j in range(4):
                assert np.array_equal(batch.data[k, j], x[k + j])


class TestWindowsContaining:
    def test_interior_sample_appears_in_all_three(self):
        assert windows_containing(2, 5, WindowConfig(3)) == [(0, 2), (1, 1), (2, 0)]

    def test_first_sample_only_in_first_window(self):
        assert windows_containing(0, 5, WindowConfig(3)) == [(0, 0)]

    def test_last_sample_only_in_last_window(self):
        assert windows_containing(4, 5, WindowConfig(3)) == [(2, 2)]

    def test_out_of_range_index(self):
        with pytest.raises(IndexError):
            windows_containing(5, 5, WindowConfig(3))
        with pytest.raises(IndexError):
            windows_containing(-1, 5, WindowConfig(3))


@st.composite
def n_and_t(draw):
    t = draw(st.integers(min_value=1, max_value=12))
    n = draw(st.integers(min_value=t, max_value=60))
    return n, t


class TestInvariants:
    @given(n_and_t())
    @settings(max_examples=60, deadline=None)
    def test_coverage_is_a_bijection_onto_all_slots(self, nt):
        n, t = nt
        cfg = WindowConfig(t)
        seen = set()
        for i in range(n):
            for pair in windows_containing(i, n, cfg):
                assert pair not in seen
                seen.add(pair)
        w = n - t + 1
        assert seen == {(k, o) for k in range(w) for o in range(t)}

    @given(n_and_t())
    @settings(max_examples=60, deadline=None)
    def test_counting_identity(self, nt):
        n, t = nt
        cfg = WindowConfig(t)
        total = sum(len(windows_containing(i, n, cfg)) for i in range(n))
        assert total == (n - t + 1) * t
        assert coverage_counts(n, cfg).sum() == total

    @given(n_and_t())
    @settings(max_examples=60, deadline=None)
    def test_coverage_formula(self, nt):
        # min(t, i+1, n-i), additionally capped by the window count when
        # n < 2t-1 and no fully-interior samples exist
        n, t = nt
        cfg = WindowConfig(t)
        counts = coverage_counts(n, cfg)
        for i in range(n):
            assert counts[i] == min(t, i + 1, n - i, n - t + 1)
            assert counts[i] == len(windows_containing(i, n, cfg))

    @given(n_and_t())
    @settings(max_examples=40, deadline=None)
    def test_stitching_reconstructs_the_source(self, nt):
        n, t = nt
        rng = np.random.default_rng(n * 31 + t)
        x = rng.normal(size=(n, 3))
        batch = make_windows(x, WindowConfig(t))
        rows = [batch.data[k, 0] for k in range(batch.windows)]
        rows.extend(batch.data[-1, 1:])
        assert np.array_equal(np.stack(rows), x)
