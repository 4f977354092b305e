import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from terrascope.errors import (
    AllZeroValues,
    EmptyWeights,
    InvalidParameter,
    MalformedCsv,
    NegativeValue,
    NonpositiveDistance,
    TooFewObservations,
)
from terrascope.raster import GeoTransform, RasterGrid
from terrascope.spatial_stats import (
    build_weights,
    g_permutation_test,
    general_g,
    raster_observations,
    read_points,
)

LINE = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]


def oracle_g(values, coords, d):
    """Exact G and E[G] for binary weights by enumerating ordered pairs in rationals."""
    x = [Fraction(v) for v in values]
    n = len(x)
    num = den = wsum = Fraction(0)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dist2 = (coords[i][0] - coords[j][0]) ** 2 + (coords[i][1] - coords[j][1]) ** 2
            w = 1 if 0 < dist2 <= d * d else 0
            num += w * x[i] * x[j]
            den += x[i] * x[j]
            wsum += w
    return num / den, wsum / (n * (n - 1))


def exact_permutation_p(values, coords, d):
    """Fraction of all n! orderings whose |G - E| is at least the observed one."""
    g_obs, e = oracle_g(values, coords, d)
    target = abs(g_obs - e)
    perms = list(itertools.permutations(values))
    hits = sum(abs(oracle_g(p, coords, d)[0] - e) >= target for p in perms)
    return hits / len(perms)


def test_line_weights():
    w = build_weights(LINE, 1.0)
    assert len(w) == 6
    assert sorted(zip(w.i.tolist(), w.j.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]
    assert np.all(w.w == 1)


def test_line_weights_short_band():
    assert len(build_weights(LINE, 0.5)) == 0


def test_raster_rook_weights():
    w = build_weights(RasterGrid(np.ones((2, 2))), 1.0)
    assert len(w) == 8
    dense = w.dense()
    assert dense[0, 3] == 0 and dense[1, 2] == 0
    assert np.array_equal(dense, dense.T)


def test_raster_weights_use_world_units():
    grid = RasterGrid(np.ones((2, 2)), geo=GeoTransform(30, 0, 0, 0, -30, 0))
    assert len(build_weights(grid, 1.0)) == 0
    assert len(build_weights(grid, 30.0)) == 8


def test_raster_observations_skip_nodata():
    valid = np.array([[True, False], [True, True]])
    coords, vals = raster_observations(RasterGrid.from_array(np.array([[1.0, 0.0], [3.0, 4.0]]), valid))
    assert coords.tolist() == [[0, 0], [0, 1], [1, 1]]
    assert vals.tolist() == [1, 3, 4]


def test_inverse_distance_weights():
    w = build_weights([(0, 0), (2, 0), (0, 4)], 3.0, "inverse_distance")
    dense = w.dense()
    assert dense[0, 1] == 0.5 and dense[1, 0] == 0.5
    assert dense[0, 2] == 0


def test_coincident_points_get_no_weight():
    # distance 0 is outside the band 0 < dist <= d
    dense = build_weights([(0, 0), (0, 0), (1, 0)], 1.0).dense()
    assert dense[0, 1] == 0 and dense[1, 0] == 0
    assert dense[0, 2] == 1 and dense[1, 2] == 1


def test_weight_errors():
    with pytest.raises(TooFewObservations):
        build_weights([(0, 0)], 1.0)
    with pytest.raises(NonpositiveDistance):
        build_weights(LINE, 0.0)
    with pytest.raises(InvalidParameter):
        build_weights(LINE, 1.0, "gaussian")


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=2, max_size=12), st.floats(0.5, 6))
def test_weights_symmetric_without_self_pairs(pts, d):
    w = build_weights(pts, d)
    dense = w.dense()
    assert np.array_equal(dense, dense.T)
    assert np.all(w.i != w.j)


def test_constant_field_equals_expectation():
    w = build_weights(LINE, 1.0)
    res = general_g([3.0] * 4, w)
    assert abs(res.g - res.expected_g) <= 1e-15


def test_clustered_line():
    w = build_weights(LINE, 1.0)
    res = general_g([1, 1, 2, 2], w)
    assert oracle_g([1, 1, 2, 2], LINE, 1.0) == (Fraction(14, 26), Fraction(1, 2))
    assert res.g == pytest.approx(14 / 26, abs=1e-12)
    assert res.expected_g == pytest.approx(0.5, abs=1e-12)
    assert res.g > res.expected_g
    assert res.sum_weights == 6 and res.n == 4


def test_alternating_line():
    res = general_g([2, 1, 2, 1], build_weights(LINE, 1.0))
    g, _ = oracle_g([2, 1, 2, 1], LINE, 1.0)
    assert g == Fraction(12, 26)
    assert res.g == pytest.approx(float(g), abs=1e-12)
    assert res.g < 0.5


def test_value_errors():
    w = build_weights(LINE, 1.0)
    with pytest.raises(NegativeValue):
        general_g([1, -1, 2, 2], w)
    with pytest.raises(AllZeroValues):
        general_g([0, 0, 0, 5], w)
    with pytest.raises(EmptyWeights):
        general_g([1, 1, 2, 2], build_weights(LINE, 0.5))


points_and_values = st.integers(2, 6).flatmap(
    lambda n: st.tuples(
        st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=n, max_size=n, unique=True),
        st.lists(st.integers(0, 50), min_size=n, max_size=n).filter(lambda v: sum(x > 0 for x in v) >= 2),
    )
)


@settings(max_examples=100)
@given(points_and_values, st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_matches_pair_oracle(data, d):
    pts, vals = data
    w = build_weights(pts, d)
    if len(w) == 0:
        return
    res = general_g(vals, w)
    g, e = oracle_g(vals, pts, d)
    assert res.g == pytest.approx(float(g), rel=1e-12, abs=1e-12)
    assert res.expected_g == pytest.approx(float(e), rel=1e-12)


@settings(max_examples=100)
@given(points_and_values, st.floats(1e-3, 1e3))
def test_scale_invariance(data, s):
    pts, vals = data
    w = build_weights(pts, 1.5)
    if len(w) == 0:
        return
    base = general_g(vals, w)
    scaled = general_g(np.array(vals, float) * s, w)
    assert scaled.g == pytest.approx(base.g, rel=1e-12, abs=1e-300)
    assert scaled.expected_g == base.expected_g


@settings(max_examples=50)
@given(st.lists(st.floats(0.1, 100), min_size=4, max_size=4), st.lists(st.floats(0.1, 100), min_size=4, max_size=4))
def test_expectation_ignores_values(a, b):
    w = build_weights(LINE, 1.0)
    assert general_g(a, w).expected_g == general_g(b, w).expected_g


def test_permutation_constant_values():
    res = g_permutation_test([5.0] * 4, build_weights(LINE, 1.0), 199, seed=3)
    assert res.permutation_p == 1.0


def test_permutation_matches_exact_enumeration_on_line():
    exact = exact_permutation_p([1, 1, 2, 2], LINE, 1.0)
    assert exact == 1.0
    res = g_permutation_test([1, 1, 2, 2], build_weights(LINE, 1.0), 999, seed=42)
    assert abs(res.permutation_p - exact) <= 0.05


def test_permutation_calibrated_where_p_is_small():
    pts = [(float(i), 0.0) for i in range(6)]
    vals = [1, 1, 2, 5, 8, 9]
    exact = exact_permutation_p(vals, pts, 1.0)
    assert exact < 0.5
    res = g_permutation_test(vals, build_weights(pts, 1.0), 999, seed=42)
    assert abs(res.permutation_p - exact) <= 0.05


def test_permutation_deterministic_and_worker_independent(monkeypatch):
    w = build_weights([(float(i), 0.0) for i in range(6)], 1.0)
    vals = [1, 1, 2, 5, 8, 9]
    monkeypatch.setenv("TERRASCOPE_THREADS", "1")
    a = g_permutation_test(vals, w, 500, seed=7)
    monkeypatch.setenv("TERRASCOPE_THREADS", "6")
    b = g_permutation_test(vals, w, 500, seed=7)
    assert a == b


def test_permutation_needs_enough_draws():
    with pytest.raises(InvalidParameter):
        g_permutation_test([1, 1, 2, 2], build_weights(LINE, 1.0), 50)


def test_result_json():
    res = g_permutation_test([1, 1, 2, 2], build_weights(LINE, 1.0), 99)
    data = json.loads(res.to_json())
    assert set(data) == {"g", "expected_g", "n", "sum_weights", "permutation_p"}


def test_read_points(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("x,y,value\n0,0,1\n1,0,2\n\n# note\n2,0,3\n")
    coords, vals = read_points(path)
    assert coords.tolist() == [[0, 0], [1, 0], [2, 0]]
    assert vals.tolist() == [1, 2, 3]
    path.write_text("0,0,1\n1,0\n")
    with pytest.raises(MalformedCsv):
        read_points(path)
    path.write_text("0,0,1\n1,0,abc\n")
    with pytest.raises(MalformedCsv):
        read_points(path)
