"""Batch command line.

    terrascope classify --bands b1.asc,b2.asc --k 6 --seed 7 --out classes.asc --model model.json
    terrascope change --method cva --a-bands a1.asc,a2.asc --b-bands b1.asc,b2.asc --out mask.asc
    terrascope gstat --points pts.csv --d 1.0 --perms 999
    terrascope pipeline --a-bands ... --b-bands ... --k 6 --out-dir run/

Exit codes: 0 success, 2 input or parse error, 3 numeric failure. Outputs are
staged to temporary files and renamed into place only after every step of a
command has succeeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import change, cluster, edges, report, segment, spatial_stats
from .errors import InputError, NumericError
from .raster import ascii_grid_text, load_raster, stack_bands

DEFAULT_SEED = 42
DEFAULT_K_SIGMA = 2.0

# flags each command needs; checked after the config file is merged in
_REQUIRED = {
    "edges": ("input", "out"),
    "segment": ("input", "out"),
    "classify": ("bands", "k", "out"),
    "gstat": (),
    "change": ("method", "out"),
    "report": ("classes",),
    "pipeline": ("a_bands", "b_bands", "k", "out_dir"),
}


class _UsageError(InputError):
    pass


class StagedOutputs:
    """Collect output files in memory; write them all or none."""

    def __init__(self) -> None:
        self._files: dict[Path, bytes] = {}

    def add(self, path, content: str | bytes) -> None:
        if isinstance(content, str):
            content = content.encode()
        self._files[Path(path)] = content

    def __len__(self) -> int:
        return len(self._files)

    def commit(self) -> None:
        staged: list[tuple[str, Path]] = []
        try:
            for path, data in self._files.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                staged.append((tmp, path))
        except BaseException:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)


def _split(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _floats(value) -> list[float]:
    try:
        return [float(v) for v in _split(value)]
    except ValueError:
        raise _UsageError(f"expected comma-separated numbers, got {value!r}") from None


def _ints(value) -> list[int]:
    try:
        return [int(v) for v in _split(value)]
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got {value!r}") from None


def _sibling(out: str, suffix: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _load_stack(paths):
    paths = _split(paths)
    if not paths:
        raise _UsageError("no band files given")
    return stack_bands([load_raster(p) for p in paths])


def _load_classes(path, names=None) -> cluster.ClassMap:
    return cluster.ClassMap.from_grid(load_raster(path), names=names)


def _names(args) -> dict[int, str]:
    return report.read_class_names(args.names) if getattr(args, "names", None) else {}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_edges(args, out: StagedOutputs) -> None:
    grid = load_raster(args.input, args.world)
    if args.method == "sobel":
        field = edges.sobel_gradient_field(grid)
        emap = edges.nonmax_suppress(field, args.threshold)
        if args.magnitude:
            out.add(args.magnitude, ascii_grid_text(field.magnitude))
    else:
        emap = edges.laplacian_zero_crossings(grid, args.min_slope)
    emap = edges.link_edges(emap, args.dilate)
    out.add(args.out, ascii_grid_text(emap.as_grid()))


def _cmd_segment(args, out: StagedOutputs) -> None:
    grid = load_raster(args.input, args.world)
    if args.method == "threshold":
        seg = segment.threshold_segment(grid, _floats(args.cuts))
    elif args.method == "region":
        if not args.seeds:
            raise _UsageError("--seeds is required for region growing")
        seg = segment.region_grow(grid, segment.read_seeds(args.seeds), args.tolerance)
    else:
        seg = segment.edge_based_segment(grid, args.nms_threshold, args.dilate)
    out.add(args.out, ascii_grid_text(seg.as_grid()))


def _classify(args, bands, names):
    stack = _load_stack(bands)
    classes, model = cluster.classify_stack(stack, args.k, args.seed, args.max_iter, args.tol, args.sample_cap)
    return cluster.ClassMap(classes.labels, classes.k, names, classes.geo), model


def _cmd_classify(args, out: StagedOutputs) -> None:
    names = _names(args)
    classes, model = _classify(args, args.bands, names)
    out.add(args.out, ascii_grid_text(classes.as_grid()))
    if args.model:
        out.add(args.model, model.to_json())
    if args.report:
        out.add(args.report, report.render_reports(report.class_areas(classes), args.format))


def _cmd_gstat(args, out: StagedOutputs) -> None:
    if bool(args.points) == bool(args.grid):
        raise _UsageError("give exactly one of --points or --grid")
    if args.points:
        coords, values = spatial_stats.read_points(args.points)
        weights = spatial_stats.build_weights(coords, args.d, args.scheme)
    else:
        grid = load_raster(args.grid)
        _, values = spatial_stats.raster_observations(grid)
        weights = spatial_stats.build_weights(grid, args.d, args.scheme)
    if args.perms:
        result = spatial_stats.g_permutation_test(values, weights, args.perms, args.seed)
    else:
        result = spatial_stats.general_g(values, weights)
    if args.out:
        out.add(args.out, result.to_json())
    else:
        sys.stdout.write(result.to_json())


def _cmd_change(args, out: StagedOutputs) -> None:
    method = args.method
    if method in ("difference", "multiscale"):
        if not (args.a and args.b):
            raise _UsageError(f"--a and --b are required for {method}")
        a, b = load_raster(args.a), load_raster(args.b)
        if method == "difference":
            result = change.image_difference(a, b, args.k_sigma)
        else:
            result = change.multiscale_fuse(a, b, args.levels, args.k_sigma)
    elif method in ("pca", "cva"):
        if not (args.a_bands and args.b_bands):
            raise _UsageError(f"--a-bands and --b-bands are required for {method}")
        a, b = _load_stack(args.a_bands), _load_stack(args.b_bands)
        if method == "cva":
            result = change.change_vector_analysis(a, b, args.k_sigma)
        else:
            result, components = change.pca_change(a, b, args.k_sigma)
            out.add(args.loadings or _sibling(args.out, "_pca.json"), components.to_json())
    elif method in ("postclass", "thematic"):
        if not (args.a and args.b):
            raise _UsageError(f"--a and --b class grids are required for {method}")
        a, b = _load_classes(args.a), _load_classes(args.b)
        if method == "postclass":
            matrix, result = change.postclass_compare(a, b)
            out.add(args.matrix or _sibling(args.out, "_transitions.csv"), report.render_reports(matrix, "csv"))
        else:
            result = change.thematic_change(a, b, _ints(args.theme))
    else:
        raise _UsageError(f"unknown change method {method!r}")

    out.add(args.out, ascii_grid_text(result.mask_grid()))
    if result.magnitude is not None:
        out.add(args.magnitude or _sibling(args.out, "_magnitude.asc"), ascii_grid_text(result.magnitude))
    if result.direction is not None:
        out.add(args.direction or _sibling(args.out, "_direction.asc"), ascii_grid_text(result.direction))


def _cmd_report(args, out: StagedOutputs) -> None:
    names = _names(args)
    classes = _load_classes(args.classes, names)
    if args.against:
        matrix, _ = change.postclass_compare(classes, _load_classes(args.against))
        text = report.render_reports(matrix, args.format)
    else:
        text = report.render_reports(report.class_areas(classes), args.format)
    if args.out:
        out.add(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_pipeline(args, out: StagedOutputs) -> None:
    names = _names(args)
    root = Path(args.out_dir)
    ext = args.format
    class_a, model_a = _classify(args, args.a_bands, names)
    class_b, model_b = _classify(args, args.b_bands, names)
    matrix, result = change.postclass_compare(class_a, class_b)
    out.add(root / "classes_a.asc", ascii_grid_text(class_a.as_grid()))
    out.add(root / "classes_b.asc", ascii_grid_text(class_b.as_grid()))
    out.add(root / "model_a.json", model_a.to_json())
    out.add(root / "model_b.json", model_b.to_json())
    out.add(root / "change_mask.asc", ascii_grid_text(result.mask_grid()))
    out.add(root / f"transitions.{ext}", report.render_reports(matrix, ext))
    out.add(root / f"areas_a.{ext}", report.render_reports(report.class_areas(class_a), ext))
    out.add(root / f"areas_b.{ext}", report.render_reports(report.class_areas(class_b), ext))


_COMMANDS = {
    "edges": _cmd_edges,
    "segment": _cmd_segment,
    "classify": _cmd_classify,
    "gstat": _cmd_gstat,
    "change": _cmd_change,
    "report": _cmd_report,
    "pipeline": _cmd_pipeline,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _kmeans_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--sample-cap", type=int, default=100_000)
    p.add_argument("--names", help="CSV of id,name class labels")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terrascope", description="Land-cover raster analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = {}

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        parser.commands[name] = p
        p.add_argument("--config", help="JSON file of flag values; explicit flags win")
        return p

    p = command("edges", "edge map of a single grid")
    p.add_argument("--input")
    p.add_argument("--world", help="world file for a PGM input")
    p.add_argument("--method", choices=("sobel", "laplacian"), default="sobel")
    p.add_argument("--threshold", type=float, default=1.0, help="minimum gradient magnitude")
    p.add_argument("--min-slope", type=float, default=0.0)
    p.add_argument("--dilate", type=int, default=0)
    p.add_argument("--magnitude", help="also write the gradient magnitude grid")
    p.add_argument("--out")

    p = command("segment", "segment a single grid")
    p.add_argument("--input")
    p.add_argument("--world")
    p.add_argument("--method", choices=("threshold", "region", "edge"), default="edge")
    p.add_argument("--cuts", default="")
    p.add_argument("--seeds", help="CSV of col,row seeds")
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--nms-threshold", type=float, default=1.0)
    p.add_argument("--dilate", type=int, default=1)
    p.add_argument("--out")

    p = command("classify", "k-means classification of a band stack")
    p.add_argument("--bands", help="comma-separated band grids")
    _kmeans_flags(p)
    p.add_argument("--out")
    p.add_argument("--model", help="write the fitted model as JSON")
    p.add_argument("--report", help="write the hectare report")

    p = command("gstat", "General G statistic")
    p.add_argument("--points", help="CSV of x,y,value")
    p.add_argument("--grid")
    p.add_argument("--d", type=float, default=1.0, help="distance band (cell units without georeference)")
    p.add_argument("--scheme", choices=spatial_stats.SCHEMES, default="binary")
    p.add_argument("--perms", type=int, default=999, help="permutations; 0 skips the test")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")

    p = command("change", "two-date change detection")
    p.add_argument("--method", choices=("difference", "pca", "postclass", "cva", "thematic", "multiscale"))
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--a-bands")
    p.add_argument("--b-bands")
    p.add_argument("--k-sigma", type=float, default=DEFAULT_K_SIGMA)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--theme", default="")
    p.add_argument("--out")
    p.add_argument("--magnitude")
    p.add_argument("--direction")
    p.add_argument("--matrix")
    p.add_argument("--loadings")

    p = command("report", "hectare report or transition matrix of class grids")
    p.add_argument("--classes")
    p.add_argument("--against", help="second-date class grid; renders transitions instead")
    p.add_argument("--names")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")

    p = command("pipeline", "classify two dates, compare, and report")
    p.add_argument("--a-bands")
    p.add_argument("--b-bands")
    _kmeans_flags(p)
    p.add_argument("--out-dir")
    return parser


def _config_defaults(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise _UsageError(f"{path}: config must be a JSON object")
    out = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = _config_defaults(args.config)
        subparser = parser.commands[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            raise _UsageError(f"{args.config}: unknown keys {unknown}")
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    missing = [f"--{name.replace('_', '-')}" for name in _REQUIRED[args.command] if getattr(args, name) in (None, "")]
    if missing:
        raise _UsageError(f"{args.command}: missing required {', '.join(missing)}")
    return args


def cli_run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        outputs = StagedOutputs()
        _COMMANDS[args.command](args, outputs)
        outputs.commit()
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except NumericError as exc:
        print(f"terrascope: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError, ValueError) as exc:
        print(f"terrascope: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
