import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from spatialkf import analysis
from spatialkf import filter as kf
from spatialkf.data import CountyPanel
from spatialkf.exceptions import DataError
from spatialkf.geo import build_process_covariance, calibrate_decay

from .conftest import make_landscape, make_rates

YEARS = tuple(range(2014, 2021))


def errors_with(mean, maximum, d=3143):
    """Error vector with a given mean and maximum (one county at the max)."""
    rest = (mean * d - maximum) / (d - 1)
    e = np.full(d, rest)
    e[17] = maximum
    return e


def test_absolute_errors():
    assert analysis.absolute_errors([1.0, 2.0], [1.0, 2.0]).tolist() == [0.0, 0.0]
    assert analysis.absolute_errors([5.0], [7.5]).tolist() == [2.5]
    rng = np.random.default_rng(0)
    p, a = rng.normal(size=50), rng.normal(size=50)
    assert analysis.absolute_errors(p, a).tolist() == [abs(x - y) for x, y in zip(p, a)]
    with pytest.raises(DataError):
        analysis.absolute_errors([1.0], [1.0, 2.0])


@pytest.mark.parametrize(
    "mean, maximum, published, tol_pp",
    [(5.57, 87.27, 93.62, 0.01), (1.57, 15.85, 90.08, 0.05), (20.81, 250.27, 91.69, 0.01)],
    ids=["mortality", "disability", "dispensing"],
)
def test_published_accuracy_identity(mean, maximum, published, tol_pp):
    per, avg = analysis.general_accuracy(errors_with(mean, maximum))
    assert avg == pytest.approx(1 - mean / maximum, abs=1e-12)
    assert abs(100 * avg - published) <= tol_pp
    assert per.min() == 0.0 and np.sum(per == 0.0) == 1


def test_general_accuracy_degenerate():
    per, avg = analysis.general_accuracy(np.zeros(4))
    assert per.tolist() == [1.0] * 4 and avg == 1.0


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(2, 60), elements=st.floats(0, 1e4, allow_nan=False, allow_subnormal=False)))
def test_general_accuracy_identity(e):
    per, avg = analysis.general_accuracy(e)
    assert np.all((per >= 0) & (per <= 1))
    if e.max() > 0:
        assert avg == pytest.approx(1 - e.mean() / e.max(), abs=1e-12)


def test_general_accuracy_mask():
    per, avg = analysis.general_accuracy([1.0, 4.0, 100.0], mask=[True, True, False])
    assert np.isnan(per[2])
    assert per[:2].tolist() == [0.75, 0.0]
    assert avg == 0.375


def test_hotspot_count():
    assert analysis.hotspot_count(3143) == 157
    assert analysis.hotspot_count(3143, rounding="ceil") == 158
    assert analysis.hotspot_count(20) == 1


def test_actual_hotspots_single():
    fips = tuple(f"{i:05d}" for i in range(1, 21))
    rates = np.arange(20.0)
    assert analysis.actual_hotspots(rates, fips) == {"00020"}


def test_actual_hotspots_size_full_landscape():
    rng = np.random.default_rng(1)
    fips = tuple(f"{i:05d}" for i in range(3143))
    assert len(analysis.actual_hotspots(rng.gamma(2, 5, 3143), fips)) == 157


def is_valid_top_set(chosen, rates, fips):
    # every chosen county outranks every unchosen one under (rate desc, fips asc)
    for i, j in itertools.product(range(len(fips)), repeat=2):
        if fips[i] in chosen and fips[j] not in chosen:
            if not (rates[i] > rates[j] or (rates[i] == rates[j] and fips[i] < fips[j])):
                return False
    return True


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=20, max_size=60), st.randoms())
def test_tie_break_by_enumeration(values, rnd):
    fips = [f"{k * 7 + 1:05d}" for k in range(len(values))]
    rates = np.array(values, float)
    chosen = analysis.actual_hotspots(rates, fips)
    assert len(chosen) == math.floor(0.05 * len(values))
    assert is_valid_top_set(chosen, rates, fips)
    perm = list(range(len(values)))
    rnd.shuffle(perm)
    assert analysis.actual_hotspots(rates[perm], [fips[k] for k in perm]) == chosen


def test_tie_at_cutoff_takes_lowest_fips():
    fips = tuple(f"{i:05d}" for i in range(40, 0, -1))
    rates = np.zeros(40)
    rates[[5, 10, 20]] = 9.0  # three tied at the top, only two slots
    chosen = analysis.actual_hotspots(rates, fips)
    assert chosen == {fips[20], fips[10]}


def test_vulnerability_at_mean():
    x = np.array([-1.0, 1.0] * 50 + [0.0])
    prof = analysis.vulnerability_levels(x)
    assert prof.cdf[-1] == pytest.approx(0.5)
    assert prof.levels[-1] == 11


def test_vulnerability_two_sigma():
    # mean 0, population sigma exactly 1, so the first county sits at +2 sigma
    x = np.array([2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    prof = analysis.vulnerability_levels(x, tuple("abcdefgh"))
    assert prof.mu == 0.0 and prof.sigma == 1.0
    assert prof.cdf[0] == pytest.approx(0.9772498680518208, abs=1e-15)
    assert prof.levels[0] == 20 and prof.levels[1] == 1
    assert prof.predicted_hotspots == {"a"}


def test_vulnerability_levels_bounds_and_subset():
    rng = np.random.default_rng(2)
    x = rng.gamma(2, 4, 500)
    fips = tuple(f"{i:05d}" for i in range(500))
    prof = analysis.vulnerability_levels(x, fips)
    assert prof.levels.min() >= 1 and prof.levels.max() <= 20
    level20 = {fips[i] for i in np.flatnonzero(prof.levels == 20)}
    assert prof.predicted_hotspots <= level20
    order = np.argsort(x)
    assert np.all(np.diff(prof.cdf[order]) >= 0)


def test_vulnerability_degenerate():
    with pytest.raises(DataError):
        analysis.vulnerability_levels(np.full(5, 3.0))


def test_probability_integral_transform_uniform():
    rng = np.random.default_rng(12345)
    x = rng.normal(30, 7, 10000)
    levels = analysis.vulnerability_levels(x).levels
    counts = np.bincount(levels, minlength=21)[1:]
    assert counts.sum() == 10000
    assert stats.chisquare(counts).pvalue > 0.01


def test_class_boundaries():
    assert analysis.twenty_step_class([0.0, 0.05, 0.15, 0.51, 0.9999, 1.0]).tolist() == [1, 2, 4, 11, 20, 20]


def test_hotspot_accuracy():
    assert analysis.hotspot_accuracy({"a", "b"}, {"a", "b"}) == 1.0
    assert analysis.hotspot_accuracy({"c"}, {"a", "b"}) == 0.0
    assert analysis.hotspot_accuracy({"a", "c"}, {"a", "b"}) == 0.5
    with pytest.raises(DataError):
        analysis.hotspot_accuracy({"a"}, set())


def small_study(d=30, seed=0):
    table = make_landscape(d, seed)
    panel = CountyPanel(table.fips, YEARS, make_rates(table, YEARS, seed=seed))
    Q = build_process_covariance(table, calibrate_decay(500.0))
    return panel, Q


def test_assess_identity_and_sizes():
    panel, Q = small_study(d=60)
    fr = kf.run(panel, kf.NoiseConfig(Q), range(2015, 2020), (2020,))
    for a in analysis.assess_run(fr, panel):
        assert a.avg_general_accuracy == pytest.approx(1 - a.avg_error / a.max_error, abs=1e-12)
        assert len(a.actual_hotspots) == 3
        assert 0 <= a.hotspot_accuracy <= 1
        assert np.all(a.std > 0)


def test_assess_run_prior_vs_posterior():
    panel, Q = small_study()
    fr = kf.run(panel, kf.NoiseConfig(Q), range(2015, 2020), (2020,))
    prior = analysis.assess_run(fr, panel, evaluate="prior")
    post = analysis.assess_run(fr, panel, evaluate="posterior")
    assert np.array_equal(prior[0].predicted, fr.priors[2015].mean)
    assert np.array_equal(post[0].predicted, fr.posteriors[2015].mean)
    assert np.array_equal(prior[-1].predicted, post[-1].predicted)
    assert post[0].avg_error < prior[0].avg_error


def test_assess_exclusion_mask():
    panel, Q = small_study()
    values = panel.values.copy()
    missing = np.zeros_like(values, bool)
    values[0, -1], missing[0, -1] = 0.0, True
    panel = CountyPanel(panel.fips_order, panel.years, values, missing)
    fr = kf.run(panel, kf.NoiseConfig(Q), range(2015, 2020), (2020,))
    incl = analysis.assess_run(fr, panel)[-1]
    excl = analysis.assess_run(fr, panel, exclude_missing=True)[-1]
    assert incl.max_error == incl.abs_errors.max()
    assert np.isnan(excl.general_accuracy[0])
    assert excl.max_error == incl.abs_errors[1:].max()
    assert panel.fips_order[0] not in excl.actual_hotspots


def test_sensitivity_single_scale_matches_direct_run():
    panel, Q = small_study()
    rows = analysis.sensitivity_analysis(panel, Q, [0.01], range(2015, 2020), (2020,))
    fr = kf.run(panel, kf.NoiseConfig(Q, 0.01), range(2015, 2020), (2020,))
    direct = analysis.assess_run(fr, panel)[-1]
    assert len(rows) == 1
    assert rows[0].avg_general_acc == direct.avg_general_accuracy
    assert rows[0].hotspot_acc == direct.hotspot_accuracy


def test_sensitivity_sorted():
    panel, Q = small_study()
    rows = analysis.sensitivity_analysis(panel, Q, [0.05, 0.01, 0.03], range(2015, 2020), (2020,))
    assert [r.observation_scale for r in rows] == [0.01, 0.03, 0.05]
    with pytest.raises(DataError):
        analysis.sensitivity_analysis(panel, Q, [], range(2015, 2020), (2020,))


def test_multi_year_shapes_and_reference():
    panel, Q = small_study()
    noise = kf.NoiseConfig(Q)
    res = analysis.multi_year_study(panel, noise, (4, 3, 2, 1, 5))
    assert [(r.train_count, r.year) for r in res if r.train_count == 1] == [(1, y) for y in range(2016, 2021)]
    assert [(r.train_count, r.year) for r in res if r.train_count == 4] == [(4, 2019), (4, 2020)]
    fr = kf.run(panel, noise, range(2015, 2020), (2020,))
    ref = analysis.absolute_errors(fr.priors[2020].mean, panel.column(2020))
    k5 = [r for r in res if r.train_count == 5]
    assert len(k5) == 1 and np.array_equal(k5[0].abs_errors, ref)
    for r in res:
        assert r.max_error == r.abs_errors.max()
    with pytest.raises(DataError):
        analysis.multi_year_study(panel, noise, (6,))


def test_multi_year_degrades_on_trending_panel():
    # steady trends: less training leaves the filter further behind
    table = make_landscape(30)
    rng = np.random.default_rng(0)
    slope = rng.uniform(0.5, 3, 30)
    values = 10 + slope[:, None] * np.arange(7)
    panel = CountyPanel(table.fips, YEARS, values)
    noise = kf.NoiseConfig(build_process_covariance(table, calibrate_decay(500.0)))
    res = {r.train_count: r for r in analysis.multi_year_study(panel, noise, (5, 4, 3, 2, 1)) if r.year == 2020}
    means = [res[k].abs_errors.mean() for k in (5, 4, 3, 2, 1)]
    assert means == sorted(means)
