import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from sswc import analysis as an
from sswc.analysis import PlotObservation
from sswc.errors import FormatError, InsufficientDataError, InvalidInputError


def test_reference_fixture():
    d = [1, 2, 3, 4, 5]
    res = an.paired_t_test([(x, 0) for x in d])
    assert res.t == pytest.approx(4.2426, abs=1e-4)
    assert res.df == 4
    assert res.p == pytest.approx(0.01324, abs=1e-5)
    assert res.significant
    # hand: mean 3, sd sqrt(2.5), t = 3 / (sqrt(2.5) / sqrt(5)) = 3 * sqrt(2)
    assert res.t == pytest.approx(3 * math.sqrt(2), rel=1e-12)


def test_all_equal_pairs():
    res = an.paired_t_test([(2.0, 2.0), (3.0, 3.0), (7.0, 7.0)])
    assert res.t == 0.0 and res.p == 1.0 and not res.significant and res.degenerate


def test_constant_nonzero_difference():
    res = an.paired_t_test([(3.0, 2.0), (5.0, 4.0)])
    assert res.t == math.inf and res.p == 0.0 and res.degenerate and res.significant


def test_insufficient():
    with pytest.raises(InsufficientDataError):
        an.paired_t_test([(1.0, 2.0)])
    with pytest.raises(InsufficientDataError):
        an.paired_t_test([])


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.05, 50), st.floats(0, 1))
def test_incomplete_beta_vs_scipy(a, b, x):
    assert an.regularized_incomplete_beta(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.integers(1, 200))
def test_t_sf_vs_scipy(t, df):
    assert an.t_sf_two_sided(t, df) == pytest.approx(2 * stats.t.sf(abs(t), df), abs=1e-8)


def _pairs(seed, n=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 30))
    a = rng.normal(10, 3, n)
    b = a + rng.normal(rng.normal(0, 1), 1, n)
    return list(zip(a, b))


@pytest.mark.parametrize("seed", range(100))
def test_oracle_and_symmetries(seed):
    pairs = _pairs(seed)
    res = an.paired_t_test(pairs)
    ref = stats.ttest_rel([a for a, _ in pairs], [b for _, b in pairs])
    assert res.t == pytest.approx(ref.statistic, rel=1e-9)
    assert res.p == pytest.approx(ref.pvalue, abs=1e-8)
    assert 0.0 <= res.p <= 1.0
    sw = an.paired_t_test([(b, a) for a, b in pairs])
    assert sw.t == pytest.approx(-res.t, rel=1e-12) and sw.p == pytest.approx(res.p, abs=1e-12)
    c = 123.25
    sh = an.paired_t_test([(a + c, b + c) for a, b in pairs])
    assert sh.t == pytest.approx(res.t, rel=1e-8) and sh.p == pytest.approx(res.p, abs=1e-8)
    k = 7.5
    sc = an.paired_t_test([(a * k, b * k) for a, b in pairs])
    assert sc.t == pytest.approx(res.t, rel=1e-9) and sc.p == pytest.approx(res.p, abs=1e-9)


def _obs(a, b):
    return ([PlotObservation(f"s{i}", "SSWC", v) for i, v in enumerate(a)]
            + [PlotObservation(f"n{i}", "no-SSWC", v) for i, v in enumerate(b)])


def test_group_ratio():
    assert an.group_ratio(_obs([3.4, 3.4], [1.0, 1.0])) == pytest.approx(3.4)
    assert an.group_ratio(_obs([2.0, 4.0], [3.0, 3.0])) == 1.0
    assert an.group_ratio(_obs([16, 18], [4, 6])) == pytest.approx(3.4)
    assert an.group_ratio(_obs([1.0], [0.0])) is None
    with pytest.raises(InsufficientDataError):
        an.group_ratio(_obs([1.0], []))


def test_observation_validation():
    with pytest.raises(InvalidInputError):
        PlotObservation("p", "SSWC", -1.0)


def test_observations_csv(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("plot_id,treatment,weed_area_m2\n1,SSWC,2.0\n2,no-SSWC,1.0\n3,SSWC,4.0\n4,no-SSWC,1.5\n")
    obs = an.read_observations_csv(p)
    assert an.pair_observations(obs) == [(2.0, 1.0), (4.0, 1.5)]
    p.write_text("plot_id,treatment,weed_area_m2\n1,SSWC,-2\n")
    with pytest.raises(FormatError, match=":2"):
        an.read_observations_csv(p)
    p.write_text("plot,area\n")
    with pytest.raises(FormatError):
        an.read_observations_csv(p)


def test_unbalanced_pairing():
    with pytest.raises(InvalidInputError):
        an.pair_observations(_obs([1, 2], [1]))
