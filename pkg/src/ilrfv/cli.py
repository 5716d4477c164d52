"""Command-line interface: run configs, convergence/compare tables, and
mesh generation/inspection."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import CASES
from .config import ConfigError, parse_config
from .driver import convergence_table, format_convergence_csv, run
from .mesh import (
    jittered_mesh,
    min_inscribed_diameter,
    read_mesh,
    stretched_mesh,
    uniform_diagonal_mesh,
    write_mesh,
)


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg.output.directory = args.output_dir
    result = run(cfg)
    return result.exit_code


def _cmd_convergence(args) -> int:
    resolutions = [args.base_resolution * 2**k for k in range(args.levels)]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    tables = convergence_table(
        args.case, resolutions, methods, seed=args.seed, cfl=args.cfl
    )
    csv = format_convergence_csv(tables)
    if args.output:
        Path(args.output).write_text(csv)
    sys.stdout.write(csv)
    return 0


def _cmd_mesh_gen(args) -> int:
    if args.kind == "uniform":
        mesh = uniform_diagonal_mesh(args.nx, args.ny or None, periodic=args.periodic)
    elif args.kind == "jittered":
        mesh = jittered_mesh(
            args.nx, args.ny or None, amplitude=args.jitter, seed=args.seed,
            periodic=args.periodic,
        )
    elif args.kind == "stretched":
        mesh = stretched_mesh(
            args.nx, args.ny or 2 * args.nx, stretch_factor=args.stretch,
            rng_seed=args.seed,
        )
    else:
        raise SystemExit(f"unknown mesh kind {args.kind!r}")
    write_mesh(mesh, args.out)
    print(f"wrote {mesh.num_cells} cells / {mesh.num_vertices} vertices to {args.out}")
    return 0


def _cmd_mesh_info(args) -> int:
    mesh = read_mesh(args.file)
    tags = {}
    for e in mesh.boundary_edges():
        tags[mesh.tag_names[mesh.edge_tag[e]]] = (
            tags.get(mesh.tag_names[mesh.edge_tag[e]], 0) + 1
        )
    print(f"vertices: {mesh.num_vertices}")
    print(f"cells: {mesh.num_cells} ({int(mesh.is_twin.sum())} twin triangles)")
    print(f"edges: {mesh.num_edges}")
    print(f"area: {mesh.domain_area:.12g}")
    print(f"h (min inscribed diameter): {min_inscribed_diameter(mesh):.6g}")
    for tag, count in sorted(tags.items()):
        print(f"boundary {tag}: {count} edges")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ilrfv",
        description="Finite-volume solver with QP-limited linear reconstruction",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a configured run")
    p.add_argument("config", help="config file path (or literal config text)")
    p.add_argument("--output-dir", help="override output.directory")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("convergence", help="error norms over a resolution ladder")
    p.add_argument("case", choices=CASES)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--base-resolution", type=int, default=16)
    p.add_argument("--methods", default="ilr")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cfl", type=float, default=0.3)
    p.add_argument("--output", help="also write the CSV here")
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser(
        "compare", help="convergence table comparing reconstruction methods"
    )
    p.add_argument("--case", default="double-sine", choices=CASES)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--base-resolution", type=int, default=16)
    p.add_argument("--methods", default="ilr,barth,unlimited")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cfl", type=float, default=0.3)
    p.add_argument("--output", help="also write the CSV here")
    p.set_defaults(fn=_cmd_convergence)

    mesh_p = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = mesh_p.add_subparsers(dest="mesh_command", required=True)

    p = mesh_sub.add_parser("gen", help="generate a mesh file")
    p.add_argument("--kind", default="uniform",
                   choices=("uniform", "jittered", "stretched"))
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.15)
    p.add_argument("--stretch", type=float, default=1.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_mesh_gen)

    p = mesh_sub.add_parser("info", help="summarize a mesh file")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_mesh_info)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
