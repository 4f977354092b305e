import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from terrascope.errors import (
    CellCountMismatch,
    DegenerateTransform,
    DimensionMismatch,
    EmptyInput,
    MissingHeaderKey,
    NonNumericCell,
    NonNumericLine,
    RotatedGridUnsupported,
    TruncatedPayload,
    UnsupportedMagic,
    WrongLineCount,
)
from terrascope.raster import (
    GeoTransform,
    RasterGrid,
    ascii_grid_text,
    load_ascii_grid,
    load_pgm,
    load_raster,
    pixel_world_transform,
    read_world_file,
    save_ascii_grid,
    save_pgm,
    stack_bands,
    write_world_file,
)

GRID_2X2 = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n"


def test_load_ascii_grid_header_arithmetic(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text(GRID_2X2)
    grid = load_ascii_grid(path)
    assert grid.values.ravel().tolist() == [1, 2, 3, 4]
    assert grid.geo == GeoTransform(1.0, 0.0, 0.5, 0.0, -1.0, 1.5)
    assert grid.nodata is None


def test_header_keys_are_case_insensitive(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text(GRID_2X2.upper())
    assert load_ascii_grid(path).values.ravel().tolist() == [1, 2, 3, 4]


def test_lower_left_pixel_center_convention(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text("ncols 3\nnrows 4\nxllcorner 100\nyllcorner 200\ncellsize 10\n" + "0 0 0\n" * 4)
    geo = load_ascii_grid(path).geo
    assert geo.forward(0, 0) == (105.0, 200 + 3.5 * 10)
    # the lower-left cell center sits half a cell inside the declared corner
    assert geo.forward(0, 3) == (105.0, 205.0)


def test_cell_count_mismatch_names_line(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n")
    with pytest.raises(CellCountMismatch, match=r"g\.asc:7"):
        load_ascii_grid(path)


def test_too_many_cells(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text(GRID_2X2 + "5\n")
    with pytest.raises(CellCountMismatch, match=":8"):
        load_ascii_grid(path)


def test_missing_header_key(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text("ncols 2\nnrows 2\nxllcorner 0\ncellsize 1\n1 2\n3 4\n")
    with pytest.raises(MissingHeaderKey, match="yllcorner"):
        load_ascii_grid(path)


def test_non_numeric_cell_names_line(tmp_path):
    path = tmp_path / "g.asc"
    path.write_text("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n")
    with pytest.raises(NonNumericCell, match=":7"):
        load_ascii_grid(path)


def test_nodata_roundtrip_writes_header(tmp_path):
    grid = RasterGrid.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[True, False], [True, True]]))
    path = tmp_path / "n.asc"
    save_ascii_grid(grid, path)
    text = path.read_text()
    assert "NODATA_value -9999" in text
    assert "1 -9999" in text
    back = load_ascii_grid(path)
    assert back.valid.tolist() == [[True, False], [True, True]]


@pytest.mark.parametrize("rows, c, f", [(3, 1e-5, 0.5), (1, 2.0, 3e-300)])
def test_uncornerable_origin_falls_back_to_center(tmp_path, rows, c, f):
    grid = RasterGrid(np.arange(2.0 * rows).reshape(rows, 2), geo=GeoTransform(1e4, 0, c, 0, -1e4, f))
    save_ascii_grid(grid, tmp_path / "c.asc")
    assert load_ascii_grid(tmp_path / "c.asc").geo == grid.geo


def test_rotated_grid_rejected():
    grid = RasterGrid(np.zeros((2, 2)), geo=GeoTransform(1, 0.5, 0, 0, -1, 0))
    with pytest.raises(RotatedGridUnsupported):
        ascii_grid_text(grid)


def test_non_square_cells_rejected():
    grid = RasterGrid(np.zeros((2, 2)), geo=GeoTransform(1, 0, 0, 0, -2, 0))
    with pytest.raises(RotatedGridUnsupported):
        ascii_grid_text(grid)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(
    values=st.lists(finite, min_size=1, max_size=30),
    cols=st.integers(1, 6),
    cell=st.floats(1e-3, 1e4),
    x0=st.floats(-1e7, 1e7),
    y0=st.floats(-1e7, 1e7),
    holes=st.lists(st.booleans(), min_size=30, max_size=30),
)
def test_ascii_roundtrip_is_bit_exact(tmp_path_factory, values, cols, cell, x0, y0, holes):
    n = (len(values) // cols) * cols or cols
    arr = np.resize(np.array(values), n).reshape(-1, cols)
    valid = np.array(holes[:n]).reshape(arr.shape)
    if not valid.any():
        valid[0, 0] = True
    # geo built the way a loaded file builds it: from lower-left corners
    rows = arr.shape[0]
    geo = GeoTransform(cell, 0, x0 + cell / 2, 0, -cell, y0 + (rows - 0.5) * cell)
    grid = RasterGrid.from_array(arr, valid, geo=geo)
    path = tmp_path_factory.mktemp("rt") / "g.asc"
    save_ascii_grid(grid, path)
    back = load_ascii_grid(path)
    assert back.shape == grid.shape
    assert np.array_equal(back.valid, grid.valid)
    assert back.values.tobytes() == grid.values.tobytes()
    assert back.geo == grid.geo


def test_p2_pgm(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_text("P2\n# comment\n2 2\n255\n0 255\n128 64\n")
    grid = load_pgm(path)
    assert grid.values.ravel().tolist() == [0, 255, 128, 64]
    assert grid.geo is None


def test_p5_sixteen_bit_big_endian(tmp_path):
    path = tmp_path / "a.pgm"
    samples = np.array([0, 1, 256, 65535], dtype=">u2")
    path.write_bytes(b"P5\n2 2\n65535\n" + samples.tobytes())
    assert load_pgm(path).values.ravel().tolist() == [0, 1, 256, 65535]


def test_p5_eight_bit(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5 3 1 255\n" + bytes([7, 8, 9]))
    assert load_pgm(path).values.ravel().tolist() == [7, 8, 9]


def test_p6_is_unsupported(tmp_path):
    path = tmp_path / "c.ppm"
    path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(UnsupportedMagic):
        load_pgm(path)


def test_truncated_p5(tmp_path):
    path = tmp_path / "t.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n\x00\x01\x00")
    with pytest.raises(TruncatedPayload):
        load_pgm(path)


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_writer_roundtrip(tmp_path, binary):
    grid = RasterGrid(np.array([[0, 300], [65535, 12]]))
    save_pgm(grid, tmp_path / "w.pgm", binary=binary)
    assert np.array_equal(load_pgm(tmp_path / "w.pgm").values, grid.values)


def test_world_file_mapping(tmp_path):
    path = tmp_path / "a.pgw"
    path.write_text("1\n0\n0\n-1\n100.5\n899.5\n")
    geo = read_world_file(path)
    assert (geo.a, geo.b, geo.d, geo.e, geo.c, geo.f) == (1, 0, 0, -1, 100.5, 899.5)


def test_world_file_scientific_notation(tmp_path):
    path = tmp_path / "a.wld"
    path.write_text("1.0E+00\n0.0e0\n0.000E+00\n-1e0\n1.005e2\n8.995E2\n")
    assert read_world_file(path) == GeoTransform(1, 0, 100.5, 0, -1, 899.5)


def test_world_file_line_count(tmp_path):
    path = tmp_path / "a.wld"
    path.write_text("1\n0\n0\n-1\n100.5\n")
    with pytest.raises(WrongLineCount):
        read_world_file(path)


def test_world_file_non_numeric(tmp_path):
    path = tmp_path / "a.wld"
    path.write_text("1\n0\nzero\n-1\n100.5\n3\n")
    with pytest.raises(NonNumericLine, match=":3"):
        read_world_file(path)


def test_world_file_roundtrip(tmp_path):
    geo = GeoTransform(0.3, 0.01, 1234.5, -0.02, -0.3, 99.125)
    write_world_file(geo, tmp_path / "x.wld")
    assert read_world_file(tmp_path / "x.wld") == geo


def test_pgm_picks_up_sidecar_world_file(tmp_path):
    save_pgm(RasterGrid(np.ones((2, 2))), tmp_path / "img.pgm")
    (tmp_path / "img.pgw").write_text("2\n0\n0\n-2\n1\n3\n")
    assert load_raster(tmp_path / "img.pgm").geo == GeoTransform(2, 0, 1, 0, -2, 3)


def test_forward_of_origin_is_pixel_center():
    geo = GeoTransform(1, 0, 0.5, 0, -1, 1.5)
    assert pixel_world_transform(geo, (0, 0)) == (0.5, 1.5)


def test_inverse_of_forward():
    geo = GeoTransform(1, 0, 0.5, 0, -1, 1.5)
    back = pixel_world_transform(geo, pixel_world_transform(geo, (3.25, 7.5)), "inverse")
    assert back == pytest.approx((3.25, 7.5), rel=1e-9)


def test_degenerate_transform():
    with pytest.raises(DegenerateTransform):
        pixel_world_transform(GeoTransform(0, 0, 1, 0, 0, 1), (1, 1), "inverse")


@settings(max_examples=200)
@given(
    coef=st.tuples(*[st.floats(-1e3, 1e3) for _ in range(6)]),
    point=st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)),
)
def test_inverse_forward_identity(coef, point):
    geo = GeoTransform(*coef)
    scale = max(abs(geo.a), abs(geo.b), abs(geo.d), abs(geo.e))
    # well-conditioned transforms only; near-singular maps amplify rounding unboundedly
    if scale < 1e-6 or abs(geo.determinant) < 1e-3 * scale * scale:
        return
    back = geo.inverse(*geo.forward(*point))
    tol = 1e-9 * max(1.0, abs(point[0]), abs(point[1]), abs(geo.c), abs(geo.f)) * (scale**2 / abs(geo.determinant))
    assert math.isclose(back[0], point[0], rel_tol=1e-9, abs_tol=tol)
    assert math.isclose(back[1], point[1], rel_tol=1e-9, abs_tol=tol)


def test_stack_bands_vectors():
    a = RasterGrid(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = RasterGrid(np.array([[5.0, 6.0], [7.0, 8.0]]))
    stack = stack_bands([a, b])
    vecs = stack.pixel_vectors()
    assert vecs.shape == (4, 2)
    assert vecs[0].tolist() == [1, 5]


def test_stack_bands_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        stack_bands([RasterGrid(np.zeros((2, 2))), RasterGrid(np.zeros((3, 3)))])


def test_stack_bands_empty():
    with pytest.raises(EmptyInput):
        stack_bands([])


def test_stack_nodata_is_union():
    a = RasterGrid.from_array(np.ones((2, 2)), np.array([[False, True], [True, True]]))
    b = RasterGrid(np.ones((2, 2)))
    stack = stack_bands([a, b])
    assert stack.valid.tolist() == [[False, True], [True, True]]
    assert len(stack.pixel_vectors()) == 3
