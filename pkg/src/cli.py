"""
Command line interface.

    python -m src.cli synthesize --config app/input/square.json
    python -m src.cli scan --config app/input/square.json
    python -m src.cli reconstruct --config app/input/square.json
    python -m src.cli pipeline --medium disk --n 4 --window 1.0 3.0
    python -m src.cli oracle disk-eigs --n 16 --radius 1 --k-lo 0.5 --k-hi 4
    python -m src.cli oracle bounds --medium hexagon --n 25

Toolkit errors end the process with one ``error=<code> message=<text>``
line on stderr and the exit status of the error class.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from .config import load_config
from .errors import ConfigurationError, CuspToolkitError
from .geometry import BUILTIN_MEDIA
from .main import CuspRecoveryPipeline
from .oracle import bound_window, disk_transmission_eigs, lower_bound
from .utils import dump_json, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_NO_DIP = 10

# flag dest -> "section.field" in RunConfig
OVERRIDES = {
    "medium": "medium.builtin",
    "n": "medium.n",
    "resolution": "solver.resolution",
    "points_per_wavelength": "solver.points_per_wavelength",
    "tol": "solver.tol",
    "n_jobs": "solver.n_jobs",
    "m": "measurement.m",
    "n_inc": "measurement.n_inc",
    "noise": "measurement.noise_level",
    "seed": "measurement.noise_seed",
    "window": "scan.window",
    "window_factor": "scan.window_factor",
    "step": "scan.step",
    "order": "scan.order",
    "margin": "scan.margin",
    "radius": "scan.radius",
    "weighting": "scan.weighting",
    "side": "scan.side",
    "cost": "scan.cost",
    "dip_threshold": "scan.dip_threshold",
    "refine": "scan.refine",
    "search_box": "reconstruct.search_box",
    "search_resolution": "reconstruct.resolution",
    "mode": "reconstruct.mode",
    "tau_v": "reconstruct.tau_v",
    "tau_l": "reconstruct.tau_l",
    "cluster_radius": "reconstruct.cluster_radius",
    "region": "reconstruct.region",
    "detection_index": "reconstruct.detection_index",
    "output_dir": "output_dir",
}


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigurationError so they share the one-line stderr format."""

    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def _run_options() -> argparse.ArgumentParser:
    parent = ToolkitArgumentParser(add_help=False)
    parent.add_argument("--config", help="JSON run configuration")
    parent.add_argument("--archive", help="far-field archive path (default: <output-dir>/farfield_archive.json)")
    parent.add_argument("--output-dir", dest="output_dir")

    medium = parent.add_argument_group("medium")
    medium.add_argument("--medium", choices=BUILTIN_MEDIA)
    medium.add_argument("--n", type=float, help="refractive index inside the medium")

    solver = parent.add_argument_group("forward solver")
    solver.add_argument("--resolution", type=int, help="solver grid cells per side")
    solver.add_argument("--points-per-wavelength", dest="points_per_wavelength", type=float,
                        help="cells per interior wavelength when --resolution is not given")
    solver.add_argument("--tol", type=float, help="GMRES relative tolerance")
    solver.add_argument("--n-jobs", dest="n_jobs", type=int)
    solver.add_argument("--m", type=int, help="observation angles")
    solver.add_argument("--n-inc", dest="n_inc", type=int, help="incidence angles")
    solver.add_argument("--noise", type=float, help="relative noise level added to the data")
    solver.add_argument("--seed", type=int)

    spectral = parent.add_argument_group("eigenvalue scan")
    spectral.add_argument("--window", type=float, nargs=2, metavar=("K_LO", "K_HI"))
    spectral.add_argument("--window-factor", dest="window_factor", type=float)
    spectral.add_argument("--step", type=float, help="wavenumber step h")
    spectral.add_argument("--order", type=int, help="fixed truncation order N")
    spectral.add_argument("--margin", type=int, help="margin of the truncation rule")
    spectral.add_argument("--radius", type=float, help="prior radius R of the scatterer")
    spectral.add_argument("--weighting", choices=("kernel", "herglotz"))
    spectral.add_argument("--side", choices=("incident", "observation"))
    spectral.add_argument("--cost", choices=("l2", "l1"))
    spectral.add_argument("--dip-threshold", dest="dip_threshold", type=float)
    spectral.add_argument("--refine", action="store_true", default=None,
                          help="golden-section refinement with extra forward solves")

    recon = parent.add_argument_group("reconstruction")
    recon.add_argument("--search-box", dest="search_box", type=float, nargs=4,
                       metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    recon.add_argument("--search-resolution", dest="search_resolution", type=int)
    recon.add_argument("--mode", choices=("auto", "vanishing", "localizing"))
    recon.add_argument("--tau-v", dest="tau_v", type=float)
    recon.add_argument("--tau-l", dest="tau_l", type=float)
    recon.add_argument("--cluster-radius", dest="cluster_radius", type=float)
    recon.add_argument("--region", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    recon.add_argument("--detection-index", dest="detection_index", type=int)
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = ToolkitArgumentParser(
        prog="cusp-recovery",
        description="Recover corners of a penetrable medium from far-field data",
    )
    parser.add_argument("--log-level", default="INFO", type=str.upper,
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    parser.add_argument("--plain-logs", action="store_true", help="human-readable instead of JSON logs")
    commands = parser.add_subparsers(dest="command", required=True)
    parent = _run_options()

    commands.add_parser("synthesize", parents=[parent], help="forward solves into the archive")
    commands.add_parser("scan", parents=[parent], help="indicator curve and eigenvalue detection")
    commands.add_parser("reconstruct", parents=[parent], help="Herglotz wave and corner report")
    commands.add_parser("pipeline", parents=[parent], help="synthesize, scan and reconstruct")

    oracle = commands.add_parser("oracle", help="analytic disk ground truth")
    oracle_commands = oracle.add_subparsers(dest="oracle_command", required=True)
    eigs = oracle_commands.add_parser("disk-eigs", help="transmission eigenvalues of a disk")
    eigs.add_argument("--n", type=float, required=True)
    eigs.add_argument("--radius", type=float, default=1.0)
    span = eigs.add_mutually_exclusive_group(required=True)
    span.add_argument("--window", type=float, nargs=2, metavar=("K_LO", "K_HI"))
    span.add_argument("--k-lo", dest="k_lo", type=float)
    eigs.add_argument("--k-hi", dest="k_hi", type=float)
    bounds = oracle_commands.add_parser("bounds", help="search window from the eigenvalue bound")
    bounds.add_argument("--config", help="JSON run configuration")
    bounds.add_argument("--medium", choices=BUILTIN_MEDIA)
    bounds.add_argument("--n", type=float)
    bounds.add_argument("--window-factor", dest="window_factor", type=float)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    values = vars(args)
    overrides = {}
    for dest, dotted in OVERRIDES.items():
        value = values.get(dest)
        if isinstance(value, list):
            value = [float(v) for v in value]
        overrides[dotted] = value
    return overrides


def _pipeline(args: argparse.Namespace) -> CuspRecoveryPipeline:
    config = load_config(args.config, _overrides(args))
    return CuspRecoveryPipeline(config, archive_path=getattr(args, "archive", None))


def _print_json(data: Any) -> None:
    print(dump_json(data))


def cmd_synthesize(args: argparse.Namespace) -> int:
    pipeline = _pipeline(args)
    archive = pipeline.synthesize()
    _print_json({"archive": pipeline.archive_path, "k_count": len(archive.k_list),
                 "stats": pipeline.processing_stats})
    return EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    result = _pipeline(args).scan()
    _print_json({"detections": [d.k_star for d in result.detections],
                 "diagnostic": result.diagnostic})
    return EXIT_OK if result.detections else EXIT_NO_DIP


def cmd_reconstruct(args: argparse.Namespace) -> int:
    report = _pipeline(args).reconstruct()
    _print_json({"k": report.k, "mode": report.mode, "corners": report.corners,
                 "polygon": report.polygon, "diagnostic": report.diagnostic})
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    summary = _pipeline(args).run()
    _print_json({"detections": [d["k_star"] for d in summary["detections"]],
                 "corners": None if summary["report"] is None else
                 [c["representative"] for c in summary["report"][summary["report"]["mode"]]],
                 "diagnostic": summary["diagnostic"], "stats": summary["stats"]})
    return EXIT_OK if summary["detections"] else EXIT_NO_DIP


def cmd_oracle(args: argparse.Namespace) -> int:
    if args.oracle_command == "disk-eigs":
        k_lo, k_hi = args.window if args.window else (args.k_lo, args.k_hi)
        if k_hi is None:
            raise ConfigurationError("--k-lo needs --k-hi")
        eigs = disk_transmission_eigs(args.n, args.radius, k_lo, k_hi)
        _print_json([{"k": e.k, "multiplicity": e.multiplicity, "modes": e.modes} for e in eigs])
        return EXIT_OK
    overrides = {"medium.builtin": args.medium, "medium.n": args.n,
                 "scan.window_factor": args.window_factor}
    config = load_config(args.config, overrides)
    medium = config.build_medium()
    window = bound_window(medium, config.scan.window_factor)
    _print_json({"medium": medium.name, "n": medium.n, "lower_bound": lower_bound(medium),
                 "k_lo": window.k_lo, "k_hi": window.k_hi})
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "scan": cmd_scan,
    "reconstruct": cmd_reconstruct,
    "pipeline": cmd_pipeline,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the command and map failures to exit statuses."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_status
    setup_logging(args.log_level, json_format=not args.plain_logs)
    try:
        return COMMANDS[args.command](args)
    except CuspToolkitError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_status
    except KeyboardInterrupt:
        print("error=E_INTERRUPTED message=interrupted by user", file=sys.stderr)
        return EXIT_UNEXPECTED
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"error=E_UNEXPECTED message={' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
