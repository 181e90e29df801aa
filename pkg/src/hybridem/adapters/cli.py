"""
Command-line adapter for hybridem.

Subcommands:
    hybridem run <scenario.yaml>
    hybridem compare <dirA> <dirB> --tol sparams=5e-2,pattern=0.5
    hybridem gsm extract|transform|info
    hybridem mesh sphere|check

Exit codes: 0 on success, 2 for invalid input, 3 for solver failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..errors import HybridemError, SolverError
from ..geometry import Material, load_mesh, mesh_sphere, mesh_strip_dipole, save_mesh
from ..gsm import gsm_from_mom_antenna, gsm_transform, load_gsm, save_gsm
from ..mom import PortSpec
from ..runner import compare, run
from ..units import wavenumber
from ..waves import truncation_degree

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3


def _cmd_run(args: argparse.Namespace) -> int:
    report = run(args.scenario, workers=args.workers, output_dir=args.output)
    print(json.dumps({"manifest": report.manifest, "elapsed": round(report.elapsed, 3)}, indent=2))
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    result = compare(args.dir_a, args.dir_b, args.tol)
    print(json.dumps(result.to_dict(), indent=2))
    return EXIT_OK if result.passed or not args.strict else 1


def _cmd_gsm_extract(args: argparse.Namespace) -> int:
    k0 = wavenumber(args.frequency)
    mesh = mesh_strip_dipole(args.length, args.width, args.segments)
    r_a = 0.5 * math.hypot(args.length, args.width)
    l_max = args.l_max or truncation_degree(k0, r_a, args.iota)
    port = PortSpec((0.0, 0.0, 0.0), args.reference_impedance, "feed")
    gsm = gsm_from_mom_antenna(mesh, [port], k0, l_max, workers=args.workers)
    path = save_gsm(gsm, args.output)
    print(f"wrote {path}: {gsm.n_port} port(s), L={gsm.l_max}, |Gamma|={abs(gsm.gamma[0, 0]):.6f}")
    return EXIT_OK


def _cmd_gsm_transform(args: argparse.Namespace) -> int:
    gsm = load_gsm(args.input)
    euler = tuple(math.radians(x) for x in args.euler)
    moved = gsm_transform(gsm, args.delta, euler, l_max=args.l_max)
    path = save_gsm(moved, args.output)
    print(f"wrote {path}: L {gsm.l_max} -> {moved.l_max}")
    return EXIT_OK


def _cmd_gsm_info(args: argparse.Namespace) -> int:
    gsm = load_gsm(args.input)
    block = np.block([[gsm.gamma, gsm.r], [gsm.t, gsm.s]])
    unitarity = float(np.linalg.norm(block.conj().T @ block - np.eye(block.shape[0]), 2))
    info = {
        "frequency_hz": gsm.frequency,
        "ports": gsm.n_port,
        "l_max": gsm.l_max,
        "waves": gsm.n_wave,
        "reference_impedance": list(gsm.reference_impedance),
        "gamma_abs": [abs(complex(x)) for x in np.diag(gsm.gamma)],
        "unitarity_defect": unitarity,
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def _cmd_mesh_sphere(args: argparse.Namespace) -> int:
    mesh = mesh_sphere(args.radius, args.subdivisions)
    path = save_mesh(mesh, args.output, comment=f"sphere r={args.radius} s={args.subdivisions}")
    print(f"wrote {path}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return EXIT_OK


def _cmd_mesh_check(args: argparse.Namespace) -> int:
    mesh = load_mesh(args.input, Material.pec(), require_closed=not args.open)
    info = {
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "closed": mesh.closed,
        "euler_characteristic": mesh.euler_characteristic,
        "signed_volume": mesh.signed_volume,
        "max_edge_length": float(np.max(mesh.max_edge_length)) if mesh.n_triangles else 0.0,
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridem", description="Hybrid MoM/GSM antenna-structure solver"
    )
    parser.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve a scenario file")
    p.add_argument("scenario", type=Path)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", type=Path, default=None, help="override outputs.directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="compare two run directories")
    p.add_argument("dir_a", type=Path)
    p.add_argument("dir_b", type=Path)
    p.add_argument("--tol", default=None, help="e.g. sparams=5e-2,pattern=0.5,rcs=0.5")
    p.add_argument(
        "--strict", action="store_true", help="exit 1 when a product fails its tolerance"
    )
    p.set_defaults(func=_cmd_compare)

    gsm = sub.add_parser("gsm", help="antenna GSM files").add_subparsers(
        dest="gsm_command", required=True
    )
    p = gsm.add_parser("extract", help="extract a strip-dipole GSM by MoM")
    p.add_argument("--length", type=float, required=True, help="meters")
    p.add_argument("--width", type=float, required=True, help="meters")
    p.add_argument("--segments", type=int, default=20)
    p.add_argument("--frequency", type=float, required=True, help="Hz")
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--iota", type=float, default=2.0)
    p.add_argument("--reference-impedance", type=float, default=50.0, help="ohms")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=_cmd_gsm_extract)

    p = gsm.add_parser("transform", help="reposition a GSM")
    p.add_argument("input", type=Path)
    p.add_argument("--delta", type=float, default=0.0, help="meters along the rotated z axis")
    p.add_argument(
        "--euler",
        type=float,
        nargs=3,
        default=(0.0, 0.0, 0.0),
        metavar=("ALPHA", "BETA", "GAMMA"),
        help="ZYZ Euler angles in degrees",
    )
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=_cmd_gsm_transform)

    p = gsm.add_parser("info", help="summarize a GSM file")
    p.add_argument("input", type=Path)
    p.set_defaults(func=_cmd_gsm_info)

    mesh = sub.add_parser("mesh", help="surface meshes").add_subparsers(
        dest="mesh_command", required=True
    )
    p = mesh.add_parser("sphere", help="write an icosphere mesh")
    p.add_argument("--radius", type=float, required=True, help="meters")
    p.add_argument("--subdivisions", type=int, default=2)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=_cmd_mesh_sphere)

    p = mesh.add_parser("check", help="validate a mesh file")
    p.add_argument("input", type=Path)
    p.add_argument("--open", action="store_true", help="allow boundary edges")
    p.set_defaults(func=_cmd_mesh_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s [%(levelname)s] %(message)s",
    )
    try:
        return args.func(args)
    except SolverError as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except (HybridemError, OSError) as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
