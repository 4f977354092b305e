"""Per-class hectare tabulation and CSV/JSON rendering of reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .change import TransitionMatrix
from .cluster import ClassMap
from .errors import DegenerateTransform, MalformedCsv
from .raster import GeoTransform, format_number

M2_PER_HECTARE = 10_000.0


@dataclass(frozen=True)
class AreaRow:
    category: int
    name: str
    pixels: int
    hectares: float


@dataclass(frozen=True)
class AreaReport:
    rows: tuple[AreaRow, ...]
    total_hectares: float
    cell_area_m2: float

    @property
    def total_pixels(self) -> int:
        return sum(r.pixels for r in self.rows)


def class_areas(
    classes: ClassMap, geo: GeoTransform | None = None, names: dict[int, str] | None = None
) -> AreaReport:
    """One row per class present, ordered by id; cell area from |a*e - b*d| in m^2."""
    geo = geo if geo is not None else classes.geo
    if geo is None or geo.cell_area == 0:
        raise DegenerateTransform("class areas need a non-degenerate georeference")
    names = {**classes.names, **(names or {})}
    cell = geo.cell_area
    counts = np.bincount(classes.labels.ravel(), minlength=1)
    rows = tuple(
        AreaRow(cid, names.get(cid, ""), int(counts[cid]), int(counts[cid]) * cell / M2_PER_HECTARE)
        for cid in range(1, len(counts))
        if counts[cid] > 0
    )
    return AreaReport(rows, math.fsum(r.hectares for r in rows), cell)


def read_class_names(path: str | os.PathLike) -> dict[int, str]:
    """CSV rows ``id,name``; a non-numeric first row is taken as a header."""
    names = {}
    with open(path, newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields:
                continue
            try:
                cid = int(fields[0])
            except ValueError:
                if lineno == 1:
                    continue
                raise MalformedCsv(f"{path}:{lineno}: class id {fields[0]!r} is not an integer") from None
            if len(fields) < 2:
                raise MalformedCsv(f"{path}:{lineno}: expected 'id,name'")
            names[cid] = ",".join(fields[1:]).strip()
    return names


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _area_csv(report: AreaReport) -> str:
    lines = [("category", "name", "pixels", "hectares")]
    lines += [(r.category, r.name, r.pixels, format_number(r.hectares)) for r in report.rows]
    lines.append(("Total", "", report.total_pixels, format_number(report.total_hectares)))
    return _csv(lines)


def _area_json(report: AreaReport) -> dict:
    return {
        "cell_area_m2": report.cell_area_m2,
        "rows": [
            {"category": r.category, "name": r.name, "pixels": r.pixels, "hectares": r.hectares}
            for r in report.rows
        ],
        "total_pixels": report.total_pixels,
        "total_hectares": report.total_hectares,
    }


def _transition_csv(matrix: TransitionMatrix) -> str:
    lines = [("from\\to", *matrix.classes_b)]
    for cid, row in zip(matrix.classes_a, matrix.counts):
        lines.append((cid, *(int(v) for v in row)))
    return _csv(lines)


def _transition_json(matrix: TransitionMatrix) -> dict:
    return {
        "classes_a": list(matrix.classes_a),
        "classes_b": list(matrix.classes_b),
        "counts": matrix.counts.tolist(),
        "total": matrix.total,
        "unchanged": matrix.unchanged,
    }


def render_reports(report: AreaReport | TransitionMatrix, fmt: str = "csv") -> str:
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if isinstance(report, TransitionMatrix):
        return _transition_csv(report) if fmt == "csv" else json.dumps(_transition_json(report), indent=2) + "\n"
    return _area_csv(report) if fmt == "csv" else json.dumps(_area_json(report), indent=2) + "\n"
