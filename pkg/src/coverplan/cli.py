"""Command-line interface.

Exit codes: 0 success, 1 planner failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from coverplan import __version__, harness
from coverplan.errors import CoverPlanError, InvalidInputError, MeshFormatError, SchemaVersionError
from coverplan.geometry import OCCLUDED_STYLES, generate_occluded_target, generate_sphere, write_mesh

EXIT_OK, EXIT_FAILURE, EXIT_INVALID = 0, 1, 2


def _target_from_args(args) -> dict | None:
    if getattr(args, "mesh", None):
        return {"path": args.mesh}
    if getattr(args, "target", None) == "sphere":
        return {"generator": "sphere", "radius": args.radius, "triangles": args.triangles}
    if getattr(args, "target", None) in OCCLUDED_STYLES:
        return {"generator": "occluded", "style": args.target}
    return None


def _load_config(args, require_planner: bool = True) -> harness.ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise InvalidInputError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config {args.config} is not valid JSON: {exc}") from None
    target = _target_from_args(args)
    if target is not None:
        data["target"] = target
    for key in ("planner", "repetitions", "rng_seed", "output_dir"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if not require_planner:
        data.setdefault("planner", "circling")
    if "target" not in data:
        raise InvalidInputError("no target given (use --config, --mesh or --target)")
    if "planner" not in data:
        raise InvalidInputError("no planner given (use --config or --planner)")
    return harness.ExperimentConfig.from_dict(data)


def _add_target_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--mesh", help="mesh file (STL, OBJ or PLY)")
    p.add_argument("--target", choices=("sphere",) + OCCLUDED_STYLES, help="generated target")
    p.add_argument("--radius", type=float, default=10.0, help="sphere radius in meters")
    p.add_argument("--triangles", type=int, default=960, help="sphere triangle budget")


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    out = harness.run_plan(cfg, args.output_dir)
    print(out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    target = _target_from_args(args)
    result = harness.evaluate_plan_file(args.plan_file, target, args.colored_mesh)
    print(json.dumps(result, indent=1))
    return EXIT_OK


def cmd_compare(args) -> int:
    run_dirs = []
    for i, item in enumerate(args.runs):
        path = Path(item)
        if path.is_file():
            cfg = harness.ExperimentConfig.from_file(path)
            run_dirs.append(harness.run_plan(cfg, Path(args.out) / f"run{i}_{cfg.planner}"))
        else:
            run_dirs.append(path)
    labels = args.labels.split(",") if args.labels else None
    summary = harness.compare_runs(run_dirs, args.out, labels)
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_seedpool(args) -> int:
    cfg = _load_config(args, require_planner=False)
    pool = harness.build_seed_pool(cfg, args.out)
    print(f"{len(pool['genomes'])} seed plans written to {args.out}")
    return EXIT_OK


def cmd_gen_target(args) -> int:
    info: dict = {"kind": args.kind}
    if args.kind == "sphere":
        mesh = generate_sphere(args.radius, args.triangles)
        info.update(radius=args.radius, triangles=mesh.n_triangles)
    else:
        target = generate_occluded_target(args.kind)
        mesh = target.mesh
        info.update(triangles=mesh.n_triangles, hidden_area_fraction=target.hidden_area_fraction)
    write_mesh(args.out, mesh, args.format)
    print(json.dumps(info))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coverplan", description="Coverage path planning for 3-D inspection targets.")
    parser.add_argument("--version", action="version", version=f"coverplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run a planner and write plan records")
    _add_target_args(p)
    p.add_argument("--planner", choices=harness.PLANNERS)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--rng-seed", dest="rng_seed", type=int)
    p.add_argument("--output-dir", dest="output_dir", help=f"overrides the config and ${harness.OUTPUT_DIR_ENV}")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("evaluate", help="re-evaluate a plan record and export a coverage-colored PLY")
    p.add_argument("plan_file")
    p.add_argument("--mesh", help="mesh file; default: the target recorded in the plan")
    p.add_argument("--target", choices=("sphere",) + OCCLUDED_STYLES)
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--triangles", type=int, default=960)
    p.add_argument("--colored-mesh", dest="colored_mesh", help="output PLY path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare finished runs (directories) or configs (JSON files)")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", required=True, help="directory for the comparison CSVs")
    p.add_argument("--labels", help="comma-separated label per run")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("seedpool", help="write all circling plans as a seed pool")
    _add_target_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seedpool)

    p = sub.add_parser("gen-target", help="write a generated target mesh")
    p.add_argument("kind", choices=("sphere",) + OCCLUDED_STYLES)
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--triangles", type=int, default=960)
    p.add_argument("--format", choices=("stl-binary", "stl-ascii", "obj", "ply"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_target)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, MeshFormatError, SchemaVersionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CoverPlanError as exc:
        print(f"planner failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
