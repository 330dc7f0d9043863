import math
import statistics

import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import special, stats as sps

from planx.stats import betainc, histogram, mean, sample_std, welch_t_test


def hand_welch(xs, ys):
    """Textbook Welch statistic and Welch-Satterthwaite df."""
    n1, n2 = len(xs), len(ys)
    m1, m2 = sum(xs) / n1, sum(ys) / n2
    v1 = sum((x - m1) ** 2 for x in xs) / (n1 - 1)
    v2 = sum((y - m2) ** 2 for y in ys) / (n2 - 1)
    t = (m1 - m2) / math.sqrt(v1 / n1 + v2 / n2)
    df = (v1 / n1 + v2 / n2) ** 2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    return t, df


def test_small_example_against_oracles():
    xs, ys = [1, 2, 3], [2, 3, 4]
    t_hand, df_hand = hand_welch(xs, ys)
    ref = sps.ttest_ind(xs, ys, equal_var=False)
    p_ref = 2 * sps.t.sf(abs(t_hand), df_hand)
    assert t_hand == pytest.approx(-1.224744871, abs=1e-9)
    assert df_hand == pytest.approx(4.0)
    r = welch_t_test(xs, ys)
    assert r.t == pytest.approx(ref.statistic, abs=1e-6)
    assert r.p == pytest.approx(ref.pvalue, abs=1e-6)
    assert r.p == pytest.approx(p_ref, abs=1e-9)
    assert r.df == pytest.approx(df_hand, abs=1e-12)
    assert round(r.p, 3) == 0.288


def test_identical_samples():
    xs = [1.0, 4.0, 2.5, 7.0]
    r = welch_t_test(xs, list(xs))
    assert r.t == 0.0 and r.p == pytest.approx(1.0)


def test_degenerate():
    r = welch_t_test([0, 0], [0, 0])
    assert r.degenerate and r.p == 1.0
    assert r.as_dict()["t"] == 0.0 and r.as_dict()["df"] is None
    s = welch_t_test([1, 1], [2, 2])
    assert s.degenerate and s.p == 0.0 and s.t == -math.inf
    assert s.as_dict()["t"] is None


def test_too_small():
    with pytest.raises(ValueError):
        welch_t_test([1.0], [1.0, 2.0])


@pytest.mark.parametrize("a", [0.5, 1.0, 2.5, 10.0, 100.0])
@pytest.mark.parametrize("b", [0.5, 1.0, 3.0, 50.0])
@pytest.mark.parametrize("x", [1e-6, 0.01, 0.3, 0.5, 0.77, 0.999])
def test_betainc_against_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-8)


samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30)


@settings(max_examples=200, deadline=None)
@given(samples, samples)
def test_welch_against_scipy(xs, ys):
    assume(statistics.stdev(xs) > 1e-3 and statistics.stdev(ys) > 1e-3)
    ref = sps.ttest_ind(xs, ys, equal_var=False)
    r = welch_t_test(xs, ys)
    assert r.t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    assert r.p == pytest.approx(ref.pvalue, abs=1e-8)


def test_summary_helpers():
    assert mean([1, 2, 3, 4]) == 2.5
    assert sample_std([2, 4, 4, 4, 5, 5, 7, 9]) == pytest.approx(2.138089935)
    assert sample_std([3.0]) is None


@given(st.dictionaries(st.sampled_from(["baseline", "transformed"]),
                       st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=50), min_size=1),
       st.integers(1, 30))
def test_histogram_conservation(samples, bins):
    h = histogram(samples, bins)
    for k, xs in samples.items():
        assert sum(h["counts"][k]) == len(xs)
    edges = h["edges"]
    assert edges == sorted(edges)
    assert edges[0] == min(min(v) for v in samples.values())
    assert edges[-1] >= max(max(v) for v in samples.values())
