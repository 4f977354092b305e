import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from terrascope.errors import CollinearPoints, DegenerateRange, DegenerateTransform, TooFewPoints
from terrascope.preprocess import fit_affine, normalize, read_control_points, resample
from terrascope.raster import GeoTransform, RasterGrid


def test_identity_fit():
    fit = fit_affine([((0, 0), (0, 0)), ((1, 0), (1, 0)), ((0, 1), (0, 1))])
    assert fit.transform.as_tuple() == pytest.approx((1, 0, 0, 0, 1, 0), abs=1e-12)
    assert fit.rmse == pytest.approx(0, abs=1e-12)


def test_scaled_fit():
    fit = fit_affine([((0, 0), (0, 0)), ((1, 0), (2, 0)), ((0, 1), (0, 2)), ((3, 5), (6, 10))])
    t = fit.transform
    assert (t.a, t.e) == pytest.approx((2, 2))
    assert (t.b, t.c, t.d, t.f) == pytest.approx((0, 0, 0, 0), abs=1e-12)
    assert fit.rmse < 1e-9


def test_perturbed_square_rmse():
    # Unit square, exact identity except the (1,1) target moved by delta in x.
    # An affine fit cannot absorb the checkerboard component (+-delta/4 at each
    # corner), so each corner keeps a residual of delta/4 and rmse = delta/4.
    delta = 1.0
    pairs = [((0, 0), (0, 0)), ((1, 0), (1, 0)), ((0, 1), (0, 1)), ((1, 1), (1 + delta, 1))]
    fit = fit_affine(pairs)
    assert fit.rmse == pytest.approx(delta / 4, rel=1e-12)

    # second route: SVD least squares
    src = np.array([p[0] for p in pairs], float)
    dst = np.array([p[1] for p in pairs], float)
    design = np.column_stack([src, np.ones(4)])
    coef, *_ = np.linalg.lstsq(design, dst, rcond=None)
    resid = design @ coef - dst
    assert fit.rmse == pytest.approx(np.sqrt(np.mean(np.sum(resid**2, axis=1))), rel=1e-12)
    assert (fit.transform.a, fit.transform.b, fit.transform.c) == pytest.approx(tuple(coef[:, 0]))


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        fit_affine([((0, 0), (0, 0)), ((1, 0), (1, 0))])


def test_collinear_points():
    with pytest.raises(CollinearPoints):
        fit_affine([((0, 0), (0, 0)), ((1, 1), (1, 0)), ((2, 2), (0, 1)), ((3, 3), (5, 5))])


@settings(max_examples=100)
@given(
    coef=st.tuples(*[st.floats(-100, 100) for _ in range(6)]),
    pts=st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=3, max_size=12, unique=True),
)
def test_exact_affine_sets_fit_exactly(coef, pts):
    src = np.array(pts, float)
    centered = src - src.mean(axis=0)
    if np.linalg.matrix_rank(centered) < 2:
        return
    geo = GeoTransform(*coef)
    pairs = [((c, r), geo.forward(c, r)) for c, r in pts]
    scale = max(1.0, max(abs(v) for p in pairs for v in p[1]))
    fit = fit_affine(pairs)
    assert fit.rmse <= 1e-9 * scale


def test_control_point_csv(tmp_path):
    path = tmp_path / "gcp.csv"
    path.write_text("# src_col,src_row,dst_x,dst_y\n0,0,100,200\n1,0,101,200\n\n0,1,100,199 # tie\n")
    cps = read_control_points(path)
    fit = fit_affine(cps)
    assert fit.transform.as_tuple() == pytest.approx((1, 0, 100, 0, -1, 200))


def ramp(rows=4, cols=5):
    return RasterGrid(np.arange(rows * cols, dtype=float).reshape(rows, cols))


@pytest.mark.parametrize("method", ["nearest", "bilinear"])
def test_identity_resample(method):
    grid = ramp()
    out = resample(grid, (1, 0, 0, 0, 1, 0), grid.rows, grid.cols, method)
    assert np.array_equal(out.values, grid.values)
    assert out.valid.all()


def test_shift_one_column_nearest():
    grid = ramp()
    out = resample(grid, (1, 0, 1, 0, 1, 0), grid.rows, grid.cols, "nearest")
    assert np.array_equal(out.values[:, :-1], grid.values[:, 1:])
    assert not out.valid[:, -1].any()
    assert out.valid[:, :-1].all()


def test_nearest_rounds_half_up():
    grid = ramp(1, 4)
    out = resample(grid, (1, 0, 0.5, 0, 1, 0), 1, 3, "nearest")
    assert out.values.ravel().tolist() == [1, 2, 3]


def test_bilinear_half_pixel_midpoints():
    grid = ramp(3, 4)  # value = 4*row + col
    out = resample(grid, (1, 0, 0.5, 0, 1, 0.5), 2, 3, "bilinear")
    v = grid.values
    for r in range(2):
        for c in range(3):
            expected = 0.25 * (v[r, c] + v[r, c + 1] + v[r + 1, c] + v[r + 1, c + 1])
            assert out.values[r, c] == pytest.approx(expected)
    # the last output column would need input column 4, which does not exist
    wide = resample(grid, (1, 0, 0.5, 0, 1, 0.5), 2, 4, "bilinear")
    assert not wide.valid[:, 3].any()


def test_bilinear_refuses_nodata_neighbours():
    valid = np.ones((3, 3), bool)
    valid[1, 1] = False
    grid = RasterGrid.from_array(np.ones((3, 3)), valid)
    out = resample(grid, (1, 0, 0.5, 0, 1, 0), 3, 2, "bilinear")
    assert out.valid.tolist() == [[True, True], [False, False], [True, True]]


def test_resample_composes_georeference():
    grid = RasterGrid(np.zeros((4, 4)), geo=GeoTransform(10, 0, 5, 0, -10, 35))
    out = resample(grid, (2, 0, 0.5, 0, 2, 0.5), 2, 2, "nearest")
    assert out.geo.forward(0, 0) == grid.geo.forward(0.5, 0.5)
    assert out.geo.a == 20


def test_degenerate_resample():
    with pytest.raises(DegenerateTransform):
        resample(ramp(), (0, 0, 0, 0, 0, 0), 2, 2)


def test_minmax():
    out = normalize(RasterGrid(np.array([[0.0, 5.0, 10.0]])), "minmax")
    assert out.values.ravel().tolist() == [0, 0.5, 1]


@pytest.mark.parametrize("mode", ["minmax", "zscore"])
def test_constant_grid_rejected(mode):
    with pytest.raises(DegenerateRange):
        normalize(RasterGrid(np.full((2, 2), 3.0)), mode)


def test_normalize_keeps_nodata():
    valid = np.array([[True, False, True]])
    grid = RasterGrid.from_array(np.array([[0.0, 99.0, 4.0]]), valid)
    out = normalize(grid, "minmax")
    assert out.valid.tolist() == valid.tolist()
    assert out.values[0, 2] == 1.0


@settings(max_examples=100)
@given(
    st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40).filter(lambda xs: np.std(xs) > 1e-3 * max(1, np.max(np.abs(xs))))
)
def test_zscore_statistics(xs):
    out = normalize(RasterGrid(np.array([xs])), "zscore")
    data = out.values[out.valid]
    assert abs(data.mean()) <= 1e-12
    assert abs(data.std() - 1) <= 1e-12
