import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pinnlab.sampling import (
    FlatFieldWarning,
    PartitionSchedule,
    ScheduleError,
    gradient_norm,
    gradient_weighted_sample,
    progressive_sample,
    uniform_sample,
)

WAVE = [(0.0, 2.0), (0.0, 4.0)]


# ---------------------------------------------------------------------------
# uniform


def test_uniform_inside_box_and_deterministic():
    a = uniform_sample(WAVE, 5000, seed=3)
    b = uniform_sample(WAVE, 5000, seed=3)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, uniform_sample(WAVE, 5000, seed=4).points)
    assert a.points.shape == (5000, 2)
    assert np.all(a.points >= 0) and np.all(a.points[:, 0] <= 2) and np.all(a.points[:, 1] <= 4)


def test_uniform_mean_within_clt_band():
    n = 100000
    p = uniform_sample(WAVE, n, seed=0).points
    for k, (lo, hi) in enumerate(WAVE):
        sd = (hi - lo) / np.sqrt(12 * n)
        assert abs(p[:, k].mean() - 0.5 * (lo + hi)) <= 4 * sd


def test_uniform_rejects_bad_input():
    with pytest.raises(ValueError):
        uniform_sample(WAVE, 0, seed=0)
    with pytest.raises(ValueError):
        uniform_sample([(1.0, 0.0)], 5, seed=0)


# ---------------------------------------------------------------------------
# progressive


def strip_schedule(**kw):
    return PartitionSchedule(WAVE, [[[0.0, 2.0], [0.0, 0.1]]], **kw)


def test_first_stage_stays_in_seed_strip():
    p = progressive_sample(strip_schedule(), 0, 2000, seed=1).points
    assert np.all(p[:, 1] <= 0.1)


def test_final_stage_is_uniform_on_domain():
    sch = strip_schedule(stages=4)
    p = progressive_sample(sch, 3, 20000, seed=2).points
    assert stats.kstest(p[:, 0], stats.uniform(0, 2).cdf).pvalue > 0.01
    assert stats.kstest(p[:, 1], stats.uniform(0, 4).cdf).pvalue > 0.01


def test_stage_lookup_and_range():
    sch = strip_schedule(stages=3, iterations_per_stage=10)
    assert [sch.stage_at(i) for i in (0, 9, 10, 25, 1000)] == [0, 0, 1, 2, 2]
    with pytest.raises(ScheduleError):
        sch.region(3)


def test_overlapping_seeds_rejected():
    with pytest.raises(ScheduleError):
        PartitionSchedule(WAVE, [[[0, 1], [0, 1]], [[0.5, 1.5], [0.5, 1.5]]])
    with pytest.raises(ScheduleError):
        PartitionSchedule(WAVE, [[[0, 3], [0, 1]]])


@st.composite
def schedules(draw):
    # one or two seed boxes separated along x
    n = draw(st.integers(1, 2))
    cuts = sorted(draw(st.lists(st.floats(0.0, 2.0), min_size=2 * n, max_size=2 * n, unique=True)))
    seeds = []
    for i in range(n):
        lo, hi = cuts[2 * i], cuts[2 * i + 1]
        if hi - lo < 1e-3:
            hi = lo + 1e-3
        t0 = draw(st.floats(0.0, 3.5))
        seeds.append([[lo, min(hi, 2.0)], [t0, t0 + draw(st.floats(0.05, 0.5))]])
    if n == 2 and seeds[0][0][1] >= seeds[1][0][0]:
        seeds = seeds[:1]
    return PartitionSchedule(WAVE, seeds, growth=draw(st.floats(0.1, 1.0)), stages=draw(st.integers(2, 6)))


@settings(max_examples=100, deadline=None)
@given(schedules(), st.integers(0, 2**31 - 1))
def test_stages_are_nested(sch, seed):
    pts = np.random.default_rng(seed).uniform([0, 0], [2, 4], (400, 2))
    for k in range(sch.stages - 1):
        inside = sch.contains(k, pts)
        assert np.all(sch.contains(k + 1, pts[inside]))
        # every box of stage k lies in some box of stage k + 1
        for b in sch.region(k):
            corners = np.array(np.meshgrid(*b)).reshape(2, -1).T
            assert np.all(sch.contains(k + 1, corners))
    assert np.all(sch.contains(sch.stages - 1, pts))


# ---------------------------------------------------------------------------
# gradient weighted


def test_constant_gradient_gives_uniform_points():
    net = lambda x, t: 3.0 * x - 4.0 * t  # noqa: E731
    assert np.allclose(gradient_norm(net, [[0.1, 0.2], [1.9, 3.0]]), 5.0)
    b = gradient_weighted_sample(net, WAVE, 20000, seed=5)
    assert not b.fallback
    assert b.acceptance == pytest.approx(1 / 1.1, rel=0.02)
    assert stats.kstest(b.points[:, 0], stats.uniform(0, 2).cdf).pvalue > 0.01
    assert stats.kstest(b.points[:, 1], stats.uniform(0, 4).cdf).pvalue > 0.01


def test_flat_network_falls_back_with_warning():
    net = lambda x, t: 0.0 * x + 0.0 * t + 1.0  # noqa: E731
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        b = gradient_weighted_sample(net, WAVE, 100, seed=0)
    assert any(issubclass(x.category, FlatFieldWarning) for x in w)
    assert b.fallback and len(b) == 100


def test_density_follows_gradient_norm():
    # |grad u| = x on [0, 1], so density is proportional to x.  The two bins
    # below have equal width and centres 0.25 and 0.5: expected ratio 2.
    net = lambda x, t: 0.5 * x * x + 0.0 * t  # noqa: E731
    b = gradient_weighted_sample(net, [(0.0, 1.0), (0.0, 1.0)], 100000, seed=11)
    x = b.points[:, 0]
    low = np.count_nonzero((x >= 0.15) & (x < 0.35))
    high = np.count_nonzero((x >= 0.40) & (x < 0.60))
    assert abs(high / low - 2.0) <= 0.05 * 2.0
    deciles = np.histogram(x, bins=10, range=(0, 1))[0]
    assert np.all(np.diff(deciles) > 0)


def test_gradient_weighted_is_deterministic():
    net = lambda x, t: x * t  # noqa: E731
    a = gradient_weighted_sample(net, WAVE, 500, seed=4)
    b = gradient_weighted_sample(net, WAVE, 500, seed=4)
    assert np.array_equal(a.points, b.points)


def test_batch_csv_header(tmp_path):
    uniform_sample(WAVE, 3, seed=0).to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "x,t" and len(lines) == 4
    uniform_sample([(0, 1)] * 3, 2, seed=0).to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "x,y,t"
