"""``bbinit`` command-line interface.

Exit status: 0 on success, 1 when a run fails, 2 for bad arguments or
parameter values (checked before any work starts).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .core import BinaryMask, crop_context, rasterize_bbox
from .errors import BBInitError, InvalidInputError
from .evaluation import MEASURES, ParamGrid, load_dataset, preset_grid, run_cv
from .files import parse_region, read_image, read_mask, read_regions, write_image, write_label_map, write_mask, write_matte
from .lbdm import assemble_system, make_scribble, solve_alpha
from .methods import METHODS, FrameEvaluator, make_config
from .metrics import iou, iou_bb
from .render import overlay
from .superpixel import prepare_superpixel_scene, superpixel_boundaries

log = logging.getLogger("bbinit")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

# flag -> parameter key, per-method ownership
_PARAM_FLAGS = {
    "ocsvm": {"feature": str, "nu": float, "gamma": float, "slic_max_iters": int},
    "sbbm": {"delta": float, "eta": float, "radius": float, "slic_max_iters": int},
    "lbdm": {
        "rho_minus": float, "rho_plus": float, "tau": float, "lambda": float,
        "c": float, "window": int, "cg_tol": float, "cg_max_iters": int,
    },
}


class UsageError(Exception):
    """Argument or parameter problem detected before running."""


def _add_param_flags(p):
    g = p.add_argument_group("method parameters (defaults come from each method's config)")
    seen = set()
    for flags in _PARAM_FLAGS.values():
        for key, typ in flags.items():
            if key in seen:
                continue
            seen.add(key)
            g.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, metavar=key.upper())


def _method_params(args) -> dict:
    """Parameter flags the user set, checked against the chosen method."""
    allowed = _PARAM_FLAGS.get(args.method, {})
    params = {}
    for flags in _PARAM_FLAGS.values():
        for key in flags:
            val = getattr(args, key, None)
            if val is None or key in params:
                continue
            if key not in allowed:
                raise UsageError(f"--{key.replace('_', '-')} does not apply to method {args.method}")
            params[key] = val
    if args.method == "sbbm" and args.seed is not None:
        params["seed"] = args.seed
    try:
        make_config(args.method, params)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    return params


def _region(args):
    if (args.region is None) == (args.region_file is None):
        raise UsageError("give exactly one of --region or --region-file")
    try:
        if args.region is not None:
            return parse_region(args.region)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    regions = read_regions(args.region_file)
    if not regions:
        raise InvalidInputError(f"no region in {args.region_file}")
    return regions[0]


def _write_debug(directory, method, frame, bbox, params):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cfg = make_config(method, params)
    if method in ("ocsvm", "sbbm"):
        sp = prepare_superpixel_scene(frame, bbox, cfg.slic_max_iters)
        write_label_map(d / "superpixels.png", sp.spmap.labels)
        write_image(d / "superpixel_boundaries.png", overlay(sp.scene.crop, BinaryMask(superpixel_boundaries(sp.spmap.labels))))
    elif method == "lbdm":
        scene = crop_context(frame, bbox)
        scribble = make_scribble(scene.bbox_local, scene.extent, cfg.rho_minus, cfg.rho_plus)
        write_matte(d / "matte.png", solve_alpha(assemble_system(scene.crop, scribble, cfg), cfg).alpha)


def cmd_segment(args) -> int:
    params = _method_params(args)
    bbox = _region(args)
    frame = read_image(args.image)
    gt = read_mask(args.gt_mask) if args.gt_mask else None
    ev = FrameEvaluator(args.method, frame, bbox, gt)
    mask = ev.predict(params)
    write_mask(args.out, mask)
    if args.debug_dir:
        _write_debug(args.debug_dir, args.method, frame, bbox, params)
    if gt is not None:
        B = rasterize_bbox(bbox, ev.extent)
        print(f"phi_all {iou(gt, mask):.4f}  phi_bb {iou_bb(gt, mask, B):.4f}")
    return EXIT_OK


def _grid_for(args, params=None):
    if params is not None:
        return ParamGrid(args.method, {k: [v] for k, v in params.items()})
    source = args.grid or args.method
    if Path(source).is_file():
        grid = ParamGrid.load(source)
    elif source in METHODS:
        grid = preset_grid(source)
    else:
        raise UsageError(f"grid file {source} not found")
    if grid.method != args.method:
        raise UsageError(f"grid is for {grid.method}, not {args.method}")
    if args.method == "sbbm" and args.seed is not None and "seed" not in grid.axes:
        grid = ParamGrid(grid.method, {**grid.axes, "seed": [args.seed]})
    return grid


def cmd_evaluate(args) -> int:
    params = _method_params(args)
    try:
        grid = _grid_for(args, params)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    ds = load_dataset(args.dataset)
    table, report = run_cv(ds, grid, args.measure, 1, args.cache_dir)
    print(f"{'frame':<32} {'phi_all':>8} {'phi_bb':>8}")
    for f, key in enumerate(table.frames):
        note = f"  ({table.errors[f'0,{f}']})" if f"0,{f}" in table.errors else ""
        print(f"{key:<32} {table.phi_all[0, f]:8.4f} {table.phi_bb[0, f]:8.4f}{note}")
    print(f"{'mean':<32} {table.phi_all[0].mean():8.4f} {table.phi_bb[0].mean():8.4f}")
    if args.out:
        out = {
            "method": args.method,
            "params": table.params[0],
            "frames": table.frames,
            "phi_all": table.phi_all[0].tolist(),
            "phi_bb": table.phi_bb[0].tolist(),
            "mean_phi_all": float(table.phi_all[0].mean()),
            "mean_phi_bb": float(table.phi_bb[0].mean()),
            "errors": {k.split(",")[1]: v for k, v in table.errors.items()},
        }
        Path(args.out).write_text(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def cmd_cv(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    try:
        grid = _grid_for(args)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    ds = load_dataset(args.dataset)
    table, report = run_cv(ds, grid, args.measure, args.workers, args.cache_dir)
    log.info("cache hits %d, misses %d", table.cache_hits, table.cache_misses)
    summary = report.summary()
    print(summary)
    if args.out:
        out = Path(args.out)
        out.write_text(report.to_json())
        out.with_suffix(".txt").write_text(summary + "\n")
    if args.table_out:
        Path(args.table_out).write_text(json.dumps(table.to_dict()) + "\n")
    return EXIT_OK


def cmd_render(args) -> int:
    img = read_image(args.image)
    mask = read_mask(args.mask)
    write_image(args.out, overlay(img, mask))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbinit", description="Object segmentation from a bounding box.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_params=True):
        p.add_argument("--method", choices=METHODS, default="lbdm")
        p.add_argument("--seed", type=int, default=None, help="seed for sampling-based methods")
        if needs_params:
            _add_param_flags(p)

    p = sub.add_parser("segment", help="segment one image")
    p.add_argument("image")
    p.add_argument("--region", help='box "x,y,w,h" or 8-number polygon')
    p.add_argument("--region-file", help="file whose first line is the region")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.add_argument("--gt-mask", help="ground-truth mask; prints scores")
    p.add_argument("--debug-dir", help="also write superpixel label map / boundary overlay or alpha matte")
    common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="score one parameter setting on a dataset")
    p.add_argument("dataset")
    p.add_argument("--measure", choices=MEASURES, default="all")
    p.add_argument("--out", help="JSON report")
    p.add_argument("--cache-dir", default=None)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="grid search with leave-one-sequence-out cross-validation")
    p.add_argument("dataset")
    p.add_argument("--grid", help="grid JSON file or preset name (default: the method's preset)")
    p.add_argument("--measure", choices=MEASURES, default="all")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="report JSON (summary table goes next to it as .txt)")
    p.add_argument("--table-out", help="full score table JSON")
    p.add_argument("--cache-dir", default=None, help="score cache (default: $BBINIT_CACHE)")
    common(p, needs_params=False)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("render", help="overlay a mask on its image")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors (and --help) this way
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bbinit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BBInitError, OSError) as exc:
        print(f"bbinit {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
