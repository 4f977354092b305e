"""Rebuild the land-use hectare table from a synthetic class map at 100 m cells."""

import argparse
import sys

import numpy as np

from terrascope.cluster import ClassMap
from terrascope.raster import GeoTransform
from terrascope.report import class_areas, render_reports

TABLE = [
    (1, "Water", 135),
    (2, "Aquatic Vegetation", 210),
    (3, "Urban/Edge", 90),
    (4, "Grassland", 190),
    (5, "Bare Soil", 169),
    (6, "Forest", 270),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--seed", type=int, default=42, help="shuffles pixel positions; areas do not change")
    args = ap.parse_args()

    labels = np.concatenate([np.full(n, cid) for cid, _, n in TABLE])
    np.random.default_rng(args.seed).shuffle(labels)
    geo = GeoTransform(100.0, 0.0, 50.0, 0.0, -100.0, 28 * 100 - 50.0)
    classes = ClassMap(labels.reshape(28, 38), 6, {cid: name for cid, name, _ in TABLE}, geo)
    sys.stdout.write(render_reports(class_areas(classes), args.format))


if __name__ == "__main__":
    main()
