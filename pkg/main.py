"""
isospec - Main Entry Point
Spectral data and isospectral transforms of matrix Sturm-Liouville operators on [0,1]
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config import RunConfig, load_run_config
from darboux import DarbouxPotential, compose, load_transform_specs, validate_target
from errors import (
    ContourGeometryError,
    IsospecError,
    PotentialFormatError,
    UsageError,
    VerificationFailedError,
)
from potential import Potential, load_potential, potential_from_payload, save_potential
from propagator import propagate
from report_manager import ReportManager, groups_table, potential_table, scan_columns, scan_table, trajectory_table
from spectral_data import attach_spectrum, group_checks, m_residue
from spectrum import compute_spectrum, sigma_scan
from utils.logging_config import setup_logging, get_logger
from verify import run_suite

logger = get_logger("main")


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser raising UsageError (exit code 1) instead of exiting with 2"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _spectrum_for(V: Potential, config: RunConfig):
    return compute_spectrum(
        V,
        lambda_max=config.lambda_max,
        mesh=config.mesh,
        steps=config.steps,
        sv_tol=config.sv_tol,
        cluster_tol=config.cluster_tol,
        jobs=config.jobs,
    )


def cmd_spectrum(args: argparse.Namespace, config: RunConfig) -> int:
    """Compute the spectrum with a sigma_min scan; optionally write the scan as CSV"""
    V = load_potential(args.potential)
    spectrum = _spectrum_for(V, config)
    lams = np.linspace(args.scan_min, config.lambda_max, args.scan_points)
    scan = scan_columns(lams, sigma_scan(V, lams, config.steps))

    manager = ReportManager(config.out)
    manager.write_json(manager.spectrum_report(V, spectrum, scan))
    if args.scan_csv:
        header, rows = scan_table(scan)
        manager.write_csv(header, rows, args.scan_csv)
    return 0


def cmd_data(args: argparse.Namespace, config: RunConfig) -> int:
    """Spectrum plus g_alpha, B_alpha, F_alpha, identity residuals and contour residues"""
    V = load_potential(args.potential)
    spectrum = attach_spectrum(V, _spectrum_for(V, config), config.steps, config.jobs)

    checks, residues = [], []
    for alpha, group in enumerate(spectrum.groups, 1):
        checks.append(group_checks(V, group, config.steps))
        try:
            residues.append(m_residue(V, group, nodes=config.contour_nodes, spectrum=spectrum, steps=config.steps))
        except ContourGeometryError as e:
            logger.warning(f"Residue for alpha={alpha} skipped: {e}")
            residues.append(None)

    manager = ReportManager(config.out)
    manager.write_json(manager.data_report(V, spectrum, checks, residues))
    return 0


def cmd_transform(args: argparse.Namespace, config: RunConfig) -> int:
    """Apply the transforms of a spec file in order and save the materialized result"""
    V = load_potential(args.potential)
    specs = load_transform_specs(args.spec)
    current = compose(V, specs, config.lambda_max, config.steps, grid_size=config.steps + 1, jobs=config.jobs)

    stages: List[Dict[str, Any]] = []
    layer = current
    while isinstance(layer, DarbouxPotential):
        diagnostics = validate_target(layer.spec, layer.group, raise_on_failure=False)
        cache = layer.cache
        stages.append({
            "stage": layer.depth,
            "alpha": layer.spec.alpha,
            "lambda": layer.group.lam,
            "conditions": diagnostics.conditions,
            "margins": diagnostics.margins,
            "max_condition": cache.max_condition,
            "k_hermitian_residual": cache.k_hermitian_residual,
            "boundary_kernel_norm": cache.boundary_kernel_norm,
            "potential_asymmetry": layer.raw_asymmetry,
        })
        layer = layer.base
    stages.reverse()

    output = Path(args.output) if args.output else Path(args.potential).with_suffix(".transformed.json")
    save_potential(current, output)
    logger.info(f"Transformed potential written to {output}")

    manager = ReportManager(config.out)
    report = manager.transform_report(V, current, stages)
    report["output"] = str(output)
    manager.write_json(report)
    return 0


def cmd_verify(args: argparse.Namespace, config: RunConfig) -> int:
    """Run the verify suite; exit code 5 when a non-skipped check fails"""
    V = load_potential(args.potential)
    specs = load_transform_specs(args.spec) if args.spec else []
    spectrum = _spectrum_for(V, config)
    reports = run_suite(
        V,
        spectrum,
        specs,
        steps=config.steps,
        seed=config.seed,
        jobs=config.jobs,
        contour_nodes=config.contour_nodes,
        tolerances=config.tolerances,
    )
    manager = ReportManager(config.out)
    manager.write_json(manager.verify_report(V, reports))

    failed = [r for r in reports if not r.passed]
    for report in failed:
        logger.error(f"FAILED {report.name}: residual {report.residual:.3e} > {report.tolerance:.1e} {report.context}")
    if failed:
        raise VerificationFailedError(f"{len(failed)} of {len(reports)} check(s) failed")
    return 0


def cmd_plot(args: argparse.Namespace, config: RunConfig) -> int:
    """CSV for external plotting: potential entries, sigma_min scan, trajectory or group list"""
    path = Path(args.input)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise PotentialFormatError(f"cannot read input: {e}", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise PotentialFormatError(e.msg, path=str(path), location=f"line {e.lineno}, column {e.colno}") from e

    manager = ReportManager(config.out)
    if isinstance(payload, dict) and "groups" in payload:
        if args.what == "scan":
            if "scan" not in payload:
                raise UsageError(f"{path} has no stored sigma_min scan; plot the potential file instead")
            header, rows = scan_table(payload["scan"])
        else:
            header, rows = groups_table(payload)
        manager.write_csv(header, rows)
        return 0

    V = potential_from_payload(payload, source=str(path))
    if args.what == "potential":
        header, rows = potential_table(V, args.points)
    elif args.what == "scan":
        lams = np.linspace(args.scan_min, config.lambda_max, args.points)
        header, rows = scan_table(scan_columns(lams, sigma_scan(V, lams, config.steps)))
    else:
        header, rows = trajectory_table(propagate(V, args.lam, config.steps))
    manager.write_csv(header, rows)
    return 0


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command line arguments

    Returns:
        Parsed arguments namespace
    """
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument('--steps', type=int, help='Integration steps (even, >= 16)')
    shared.add_argument('--lambda-max', type=float, help='Spectral cutoff')
    shared.add_argument('--sv-tol', type=float, help='Relative singular value tolerance for kernels')
    shared.add_argument('--jobs', type=int, help='Worker threads')
    shared.add_argument('--seed', type=int, help='Seed for random sample points')
    shared.add_argument('--out', help='Output file (default: stdout)')
    shared.add_argument('--config', help='JSON config file')
    shared.add_argument('--log-file', help='Also log to this file')
    shared.add_argument('--log-level', help='Log level (DEBUG, INFO, WARNING, ERROR)')

    parser = _ArgumentParser(
        description="Spectral data and isospectral transforms of matrix Sturm-Liouville operators",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Eigenvalues and multiplicities below 100
  python main.py spectrum zero.json --lambda-max 100

  # Norming matrices, residue matrices and forbidden subspaces
  python main.py data diag.json --out data.json

  # Apply the transforms in spec.json and save the new potential
  python main.py transform zero.json spec.json --output transformed.json

  # Full verify suite, including transform postconditions
  python main.py verify diag.json --spec spec.json

  # Potential entries as CSV
  python main.py plot transformed.json --what potential --points 401
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)

    spectrum = subparsers.add_parser('spectrum', parents=[shared], help='Eigenvalues with multiplicities')
    spectrum.add_argument('potential', help='Potential file')
    spectrum.add_argument('--scan-csv', help='Also write a sigma_min / |det| scan to this CSV')
    spectrum.add_argument('--scan-points', type=int, default=401, help='Scan points')
    spectrum.add_argument('--scan-min', type=float, default=0.0, help='Scan start')

    data = subparsers.add_parser('data', parents=[shared], help='Spectral data per eigenvalue group')
    data.add_argument('potential', help='Potential file')

    transform = subparsers.add_parser('transform', parents=[shared], help='Apply isospectral transforms')
    transform.add_argument('potential', help='Potential file')
    transform.add_argument('spec', help='Transform spec file (object or list)')
    transform.add_argument('--output', help='Transformed potential file')

    verify = subparsers.add_parser('verify', parents=[shared], help='Run the verify suite')
    verify.add_argument('potential', help='Potential file')
    verify.add_argument('--spec', help='Transform spec file whose postconditions are checked too')

    plot = subparsers.add_parser('plot', parents=[shared], help='CSV tables for plotting')
    plot.add_argument('input', help='Potential file or spectrum report')
    plot.add_argument(
        '--what', choices=['potential', 'scan', 'trajectory'], default='potential',
        help='Table to write (a spectrum report gives its groups, or its stored scan with --what scan)'
    )
    plot.add_argument('--points', type=int, default=201, help='Sample points')
    plot.add_argument('--scan-min', type=float, default=0.0, help='Scan start')
    plot.add_argument('--lam', type=float, default=0.0, help='Spectral parameter for trajectories')

    return parser.parse_args(argv)


COMMANDS = {
    'spectrum': cmd_spectrum,
    'data': cmd_data,
    'transform': cmd_transform,
    'verify': cmd_verify,
    'plot': cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    try:
        args = parse_arguments(argv)
        setup_logging(level=args.log_level, log_file=args.log_file)
        config = load_run_config(
            args.config,
            {
                "steps": args.steps,
                "lambda_max": args.lambda_max,
                "sv_tol": args.sv_tol,
                "jobs": args.jobs,
                "seed": args.seed,
                "out": args.out,
            },
        )
        return COMMANDS[args.command](args, config)
    except IsospecError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("\nInterrupted by user")
        sys.exit(1)
    except Exception as e:
        logger.error(f"Fatal error: {str(e)}", exc_info=True)
        sys.exit(3)
