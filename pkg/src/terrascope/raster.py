"""Raster grids, affine georeferencing, and file I/O.

Three interchange formats are supported, all bit-exact:

* ESRI-style ASCII grids (``ncols``/``nrows``/``xllcorner``/``yllcorner``/
  ``cellsize``/``NODATA_value`` header, body top row first);
* PGM images, P2 (text) and P5 (binary, big-endian for 16-bit samples);
* world files (six lines: a, d, b, e, c, f).

Internally (c, f) of a :class:`GeoTransform` is always the world position of
the *center* of pixel (col=0, row=0). ASCII grid corners are converted on the
way in and out.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
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

logger = logging.getLogger(__name__)

DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class GeoTransform:
    """world_x = a*col + b*row + c ; world_y = d*col + e*row + f."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    @property
    def cell_area(self) -> float:
        return abs(self.determinant)

    @property
    def axis_aligned(self) -> bool:
        return self.b == 0 and self.d == 0 and self.a == -self.e

    def forward(self, col: float, row: float) -> tuple[float, float]:
        return (self.a * col + self.b * row + self.c, self.d * col + self.e * row + self.f)

    def inverse(self, x: float, y: float) -> tuple[float, float]:
        det = self.determinant
        if det == 0:
            raise DegenerateTransform(f"transform {self.as_tuple()} has zero determinant")
        dx = x - self.c
        dy = y - self.f
        return ((self.e * dx - self.b * dy) / det, (self.a * dy - self.d * dx) / det)

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    @classmethod
    def unit(cls, rows: int) -> "GeoTransform":
        """Unit cells with the lower-left grid corner at the origin."""
        return cls(1.0, 0.0, 0.5, 0.0, -1.0, rows - 0.5)


def pixel_world_transform(
    geo: GeoTransform, point: tuple[float, float], direction: str = "forward"
) -> tuple[float, float]:
    """Map a pixel (col, row) to world (x, y), or back with ``direction="inverse"``."""
    if direction == "forward":
        return geo.forward(*point)
    if direction == "inverse":
        return geo.inverse(*point)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Single-band grid of float64 values.

    Cells equal to ``nodata`` (or NaN) are invalid. ``values`` is stored
    read-only; derive new grids rather than mutating.
    """

    values: np.ndarray
    nodata: float | None = None
    geo: GeoTransform | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"grid values must be a non-empty 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.nodata is not None:
            object.__setattr__(self, "nodata", float(self.nodata))

    @classmethod
    def from_array(
        cls,
        values: np.ndarray,
        valid: np.ndarray | None = None,
        nodata: float | None = None,
        geo: GeoTransform | None = None,
    ) -> "RasterGrid":
        """Build a grid, writing the nodata sentinel into cells where ``valid`` is False."""
        arr = np.array(values, dtype=np.float64, copy=True)
        if valid is None or bool(np.all(valid)):
            return cls(arr, nodata, geo)
        valid = np.asarray(valid, dtype=bool)
        if nodata is None:
            nodata = DEFAULT_NODATA
            # never let a real measurement collide with the sentinel
            if np.any(arr[valid] == nodata):
                nodata = float(np.min(arr[valid])) - 1.0
        arr[~valid] = nodata
        return cls(arr, nodata, geo)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @cached_property
    def valid(self) -> np.ndarray:
        mask = ~np.isnan(self.values)
        if self.nodata is not None and not math.isnan(self.nodata):
            mask &= self.values != self.nodata
        mask.setflags(write=False)
        return mask

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Writable copy of the values with invalid cells replaced by ``fill``."""
        out = np.array(self.values, copy=True)
        out[~self.valid] = fill
        return out

    def with_values(self, values: np.ndarray, valid: np.ndarray | None = None) -> "RasterGrid":
        """New grid on the same geometry and nodata convention."""
        if valid is None:
            valid = self.valid
        return RasterGrid.from_array(values, valid, self.nodata, self.geo)


@dataclass(frozen=True, eq=False)
class BandStack:
    bands: tuple[RasterGrid, ...]
    geo: GeoTransform | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.bands[0].shape

    @property
    def count(self) -> int:
        return len(self.bands)

    @cached_property
    def valid(self) -> np.ndarray:
        mask = np.logical_and.reduce([b.valid for b in self.bands])
        mask.setflags(write=False)
        return mask

    def cube(self) -> np.ndarray:
        """(rows, cols, bands) array; invalid pixels hold zeros."""
        return np.stack([b.filled(0.0) for b in self.bands], axis=-1)

    def pixel_vectors(self) -> np.ndarray:
        """(n_valid, bands) array of valid pixel vectors in row-major order."""
        return self.cube()[self.valid]


def stack_bands(grids: Sequence[RasterGrid]) -> BandStack:
    grids = tuple(grids)
    if not grids:
        raise EmptyInput("stack_bands needs at least one grid")
    shape = grids[0].shape
    geo = None
    for i, g in enumerate(grids):
        if g.shape != shape:
            raise DimensionMismatch(f"band {i} has shape {g.shape}, expected {shape}")
        if g.geo is not None:
            if geo is not None and g.geo != geo:
                raise DimensionMismatch(f"band {i} georeferencing differs from earlier bands")
            geo = g.geo
    return BandStack(grids, geo)


# ---------------------------------------------------------------------------
# number formatting
# ---------------------------------------------------------------------------


def format_number(v: float) -> str:
    """Shortest text that parses back to exactly ``v``."""
    v = float(v)
    if v == 0:
        return "-0.0" if math.copysign(1.0, v) < 0 else "0"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _solve_offset(target: float, offset: float) -> float | None:
    """Find x with fl(x + offset) == target, so header origins reload exactly."""
    x = target - offset
    if x + offset == target:
        return x
    lo = hi = x
    for _ in range(64):
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
        if lo + offset == target:
            return lo
        if hi + offset == target:
            return hi
    return None


# ---------------------------------------------------------------------------
# ASCII grid
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("ncols", "nrows", "cellsize")


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_ascii_grid(path: str | os.PathLike) -> RasterGrid:
    path = Path(path)
    lines = path.read_text().splitlines()
    header: dict[str, str] = {}
    lineno = 0
    while lineno < len(lines):
        tokens = lines[lineno].split()
        if not tokens:
            lineno += 1
            continue
        if _is_number(tokens[0]):
            break
        if len(tokens) != 2:
            raise MissingHeaderKey(f"{path}:{lineno + 1}: malformed header line {lines[lineno]!r}")
        header[tokens[0].lower()] = tokens[1]
        lineno += 1
    body_start = lineno

    def need(key: str) -> str:
        if key not in header:
            raise MissingHeaderKey(f"{path}:{body_start + 1}: header lacks {key!r}")
        return header[key]

    def header_number(key: str, kind=float):
        raw = need(key)
        try:
            return kind(raw)
        except ValueError:
            raise NonNumericCell(f"{path}: header value {key} {raw!r} is not numeric") from None

    for key in _REQUIRED_KEYS:
        need(key)
    ncols = header_number("ncols", int)
    nrows = header_number("nrows", int)
    cell = header_number("cellsize")
    if "xllcorner" in header:
        xc = header_number("xllcorner") + cell / 2
    elif "xllcenter" in header:
        xc = header_number("xllcenter")
    else:
        raise MissingHeaderKey(f"{path}:{body_start + 1}: header lacks 'xllcorner'")
    if "yllcorner" in header:
        yc = header_number("yllcorner") + (nrows - 0.5) * cell
    elif "yllcenter" in header:
        yc = header_number("yllcenter") + (nrows - 1) * cell
    else:
        raise MissingHeaderKey(f"{path}:{body_start + 1}: header lacks 'yllcorner'")
    nodata = header_number("nodata_value") if "nodata_value" in header else None
    if ncols < 1 or nrows < 1:
        raise CellCountMismatch(f"{path}: ncols/nrows must be positive, got {ncols}x{nrows}")

    expected = nrows * ncols
    cells: list[float] = []
    last_line = body_start
    for i in range(body_start, len(lines)):
        tokens = lines[i].split()
        if not tokens:
            continue
        last_line = i
        for tok in tokens:
            try:
                v = float(tok)
            except ValueError:
                raise NonNumericCell(f"{path}:{i + 1}: cell {tok!r} is not numeric") from None
            if not math.isfinite(v) and not (nodata is not None and (v == nodata or (math.isnan(v) and math.isnan(nodata)))):
                raise NonNumericCell(f"{path}:{i + 1}: cell {tok!r} is not finite")
            cells.append(v)
        if len(cells) > expected:
            raise CellCountMismatch(f"{path}:{i + 1}: more than {nrows}x{ncols}={expected} cells")
    if len(cells) != expected:
        raise CellCountMismatch(
            f"{path}:{last_line + 1}: found {len(cells)} cells, header declares {nrows}x{ncols}={expected}"
        )
    geo = GeoTransform(cell, 0.0, xc, 0.0, -cell, yc)
    return RasterGrid(np.array(cells, dtype=np.float64).reshape(nrows, ncols), nodata, geo)


def ascii_grid_text(grid: RasterGrid) -> str:
    geo = grid.geo if grid.geo is not None else GeoTransform.unit(grid.rows)
    if not geo.axis_aligned:
        raise RotatedGridUnsupported(
            f"ASCII grids need square axis-aligned cells; got a={geo.a} b={geo.b} d={geo.d} e={geo.e}"
        )
    cell = geo.a
    # prefer corners; fall back to centers when no decimal corner reloads exactly
    xll = _solve_offset(geo.c, cell / 2)
    x_entry = f"xllcorner {format_number(xll)}" if xll is not None else f"xllcenter {format_number(geo.c)}"
    yll = _solve_offset(geo.f, (grid.rows - 0.5) * cell)
    if yll is not None:
        y_entry = f"yllcorner {format_number(yll)}"
    else:
        ylc = _solve_offset(geo.f, (grid.rows - 1) * cell)
        if ylc is None:
            logger.warning("origin y=%r cannot be written to reload exactly", geo.f)
            ylc = geo.f - (grid.rows - 1) * cell
        y_entry = f"yllcenter {format_number(ylc)}"
    out = [
        f"ncols {grid.cols}",
        f"nrows {grid.rows}",
        x_entry,
        y_entry,
        f"cellsize {format_number(cell)}",
    ]
    has_nodata = not bool(np.all(grid.valid))
    if grid.nodata is not None or has_nodata:
        nodata = grid.nodata if grid.nodata is not None else DEFAULT_NODATA
        out.append(f"NODATA_value {format_number(nodata)}")
    for row in grid.values:
        out.append(" ".join(format_number(v) for v in row))
    return "\n".join(out) + "\n"


def save_ascii_grid(grid: RasterGrid, path: str | os.PathLike) -> None:
    Path(path).write_text(ascii_grid_text(grid))


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------


def _pgm_header(data: bytes, path) -> tuple[bytes, list[int], int]:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedMagic(f"{path}: magic {magic!r} is not P2 or P5")
    values: list[int] = []
    pos = 2
    while len(values) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise TruncatedPayload(f"{path}: header ends early")
        try:
            values.append(int(data[start:pos]))
        except ValueError:
            raise UnsupportedMagic(f"{path}: bad header token {data[start:pos]!r}") from None
    # exactly one whitespace byte separates the header from a binary payload
    return magic, values, pos + 1


def load_pgm(path: str | os.PathLike) -> RasterGrid:
    data = Path(path).read_bytes()
    magic, (width, height, maxval), pos = _pgm_header(data, path)
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise UnsupportedMagic(f"{path}: invalid dimensions or maxval ({width}x{height}, {maxval})")
    n = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        payload = data[pos : pos + need]
        if len(payload) < need:
            raise TruncatedPayload(f"{path}: expected {need} payload bytes, found {len(payload)}")
        pixels = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        text = data[pos:].decode("ascii", errors="replace")
        tokens = [t for line in text.splitlines() for t in line.split("#", 1)[0].split()]
        if len(tokens) < n:
            raise TruncatedPayload(f"{path}: expected {n} samples, found {len(tokens)}")
        try:
            pixels = np.array([int(t) for t in tokens[:n]], dtype=np.float64)
        except ValueError as exc:
            raise TruncatedPayload(f"{path}: non-integer sample ({exc})") from None
    return RasterGrid(pixels.reshape(height, width))


def save_pgm(grid: RasterGrid, path: str | os.PathLike, binary: bool = True) -> None:
    """Write integer samples in [0, 65535]; invalid cells are written as 0."""
    pixels = grid.filled(0.0)
    if np.any(pixels < 0) or np.any(pixels > 65535) or np.any(pixels != np.round(pixels)):
        raise ValueError("PGM samples must be integers in [0, 65535]")
    maxval = max(int(pixels.max()), 1)
    header = f"{'P5' if binary else 'P2'}\n{grid.cols} {grid.rows}\n{maxval}\n".encode()
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        Path(path).write_bytes(header + pixels.astype(dtype).tobytes())
    else:
        body = "\n".join(" ".join(str(int(v)) for v in row) for row in pixels)
        Path(path).write_bytes(header + body.encode() + b"\n")


# ---------------------------------------------------------------------------
# world files
# ---------------------------------------------------------------------------


def read_world_file(path: str | os.PathLike) -> GeoTransform:
    lines = Path(path).read_text().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != 6:
        raise WrongLineCount(f"{path}: world file needs 6 lines, found {len(lines)}")
    nums = []
    for i, line in enumerate(lines):
        try:
            nums.append(float(line.strip()))
        except ValueError:
            raise NonNumericLine(f"{path}:{i + 1}: {line.strip()!r} is not numeric") from None
    a, d, b, e, c, f = nums
    return GeoTransform(a, b, c, d, e, f)


def write_world_file(geo: GeoTransform, path: str | os.PathLike) -> None:
    order = (geo.a, geo.d, geo.b, geo.e, geo.c, geo.f)
    Path(path).write_text("".join(repr(float(v)) + "\n" for v in order))


def load_raster(path: str | os.PathLike, world: str | os.PathLike | None = None) -> RasterGrid:
    """Load an ASCII grid or PGM by extension; PGMs pick up a sidecar world file."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        grid = load_pgm(path)
        if world is None:
            for suffix in (".pgw", ".wld"):
                if path.with_suffix(suffix).exists():
                    world = path.with_suffix(suffix)
                    break
        if world is not None:
            grid = RasterGrid(grid.values, grid.nodata, read_world_file(world))
        return grid
    return load_ascii_grid(path)


def check_same_shape(grids: Iterable, what: str = "inputs") -> None:
    shapes = {g.shape for g in grids}
    if len(shapes) > 1:
        raise DimensionMismatch(f"{what} differ in shape: {sorted(shapes)}")


__all__ = [
    "DEFAULT_NODATA",
    "BandStack",
    "GeoTransform",
    "RasterGrid",
    "ascii_grid_text",
    "format_number",
    "load_ascii_grid",
    "load_pgm",
    "load_raster",
    "pixel_world_transform",
    "read_world_file",
    "save_ascii_grid",
    "save_pgm",
    "stack_bands",
    "write_world_file",
]
