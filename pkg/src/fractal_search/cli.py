#!/usr/bin/env python3
"""
CLI interface for fractal-search.
"""
import argparse
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from fractal_search import __version__
from fractal_search.core import export
from fractal_search.core.analysis import MIN_POWER_LAW_POINTS
from fractal_search.core.config import ConfigManager, ExperimentConfig, MarkedPolicy
from fractal_search.core.controller import ExperimentController
from fractal_search.core.errors import FractalSearchError, InvalidVertexError, SizeCapExceeded
from fractal_search.core.lattice import (
    StageConfig,
    build_gasket,
    classify_vertices,
    hausdorff_dimension,
    spectral_dimension,
)
from fractal_search.core.selfcheck import run_selfcheck
from fractal_search.core.settings import RuntimeSettings, load_settings
from fractal_search.core.spectral import gasket_spectrum, hypercubic_spectrum_check

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NO_PEAK = 4

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(verbose: bool = False, settings: Optional[RuntimeSettings] = None):
    """Set up logging configuration."""
    level_name = settings.log_level.upper() if settings else "INFO"
    level = logging.DEBUG if verbose else getattr(logging, level_name, logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if settings and settings.log_file:
        Path(settings.log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(RotatingFileHandler(
            settings.log_file,
            maxBytes=settings.log_max_size,
            backupCount=settings.log_backup_count,
        ))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _marked_overrides(value: Optional[str]) -> Dict[str, Any]:
    if value is None:
        return {}
    if value in (MarkedPolicy.CENTER.value, MarkedPolicy.CORNER.value):
        return {"marked_vertex_policy": value}
    return {"marked_vertex_policy": MarkedPolicy.EXPLICIT.value, "marked_vertex": int(value)}


def load_experiment(args, **overrides: Any) -> ExperimentConfig:
    """Config file plus command-line overrides; flags left unset keep file values."""
    values: Dict[str, Any] = {
        "embedding_dim": getattr(args, "dim", None),
        "t1": getattr(args, "t1", None),
        "ancilla": True if getattr(args, "ancilla", False) else None,
        "workers": getattr(args, "workers", None),
        "output_dir": getattr(args, "out", None),
        "fit_from": getattr(args, "fit_from", None),
        "snapshot": True if getattr(args, "snapshot", False) else None,
    }
    values.update(_marked_overrides(getattr(args, "marked", None)))
    values.update(overrides)
    return ConfigManager(args.config).load_config(values)


def cmd_lattice_info(args, settings: RuntimeSettings):
    """Show gasket size, dimensions and vertex types."""
    lattice = build_gasket(StageConfig(args.dim, args.stage))
    census = classify_vertices(lattice)

    print(f"Sierpinski gasket d_E={lattice.embedding_dim} S={lattice.stage}:")
    print(f"  N: {lattice.n_vertices}")
    print(f"  k: {lattice.k}")
    print(f"  L: {lattice.linear_extent}")
    print(f"  d: {hausdorff_dimension(args.dim):.7f}")
    print(f"  d_s: {spectral_dimension(args.dim):.7f}")
    print(f"  Wrap links: {int(lattice.is_wrap.sum()) // 2}")
    print("  Internal vertex types:")
    for dirs, count in census.internal.items():
        print(f"    {list(dirs)}: {count}")
    print("  Corner vertex types:")
    for dirs, count in census.corners.items():
        print(f"    {list(dirs)}: {count}")

    if args.dump == "-":
        export.write_lattice_dump(sys.stdout, lattice)
    elif args.dump:
        path = Path(args.dump)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            export.write_lattice_dump(f, lattice)
        print(f"Lattice written to {path}")
    return EXIT_OK


def _print_run(label: str, run):
    print(f"  {label}: Q={run.Q} P={run.P:.6f} Q/sqrt(P)={run.complexity:.3f}")
    if run.no_peak:
        print(f"    ✗ no probability peak within {run.params.horizon} oracle calls")
    if run.prediction is not None:
        print(f"    predicted P={run.prediction.P_delta:.6f} Q={run.prediction.Q_delta:.1f}")
    if run.max_trap_leak is not None:
        print(f"    max trap leak {run.max_trap_leak:.2e}")


def cmd_search(args, settings: RuntimeSettings):
    """Run one stage and write its probability series."""
    config = load_experiment(args, stage_range=[args.stage], horizon_plain=args.horizon)
    controller = ExperimentController(config, settings)

    if args.t1_scan:
        results = controller.scan_t1(args.stage, args.t1_scan)
    else:
        results = [controller.run_stage(args.stage, capture_peak_state=config.snapshot)]

    no_peak = False
    for result in results:
        print(f"Search d_E={result.d_E} S={result.S} N={result.N} t1={result.t1}:")
        _print_run("plain", result.plain)
        if result.tulsi is not None:
            print(f"  cos_delta={result.cos_delta:.6f}")
            _print_run("controlled", result.tulsi)
        for path in controller.write_search(result, snapshot=config.snapshot):
            print(f"  wrote {path}")
        no_peak = no_peak or result.no_peak
    return EXIT_NO_PEAK if no_peak else EXIT_OK


def cmd_sweep(args, settings: RuntimeSettings):
    """Run a stage range and fit the scaling laws."""
    overrides = {"stage_range": args.stages} if args.stages else {}
    config = load_experiment(args, **overrides)
    if len(config.fit_stages()) < MIN_POWER_LAW_POINTS:
        print(f"Error: fits need at least {MIN_POWER_LAW_POINTS} stages, got {config.fit_stages()}")
        return EXIT_USAGE

    controller = ExperimentController(config, settings)
    sweep = controller.run_sweep()
    for row in sweep.summary_rows():
        print(
            f"  S={row['S']} N={row['N']} ancilla={row['ancilla']} "
            f"Q={row['Q']} P={row['P']:.6f} Q/sqrt(P)={row['Q_over_sqrtP']:.3f}"
        )
    for name, fit in sweep.fit_report["fits"].items():
        if fit is not None:
            print(f"  {name}: slope={fit['slope']:.4f} prefactor={fit['prefactor']:.4f} rms={fit['rms']:.4f}")
    exponents = sweep.fit_report.get("exponents")
    if exponents:
        print(f"  a - (2b - 1) = {exponents['relation_residual']:+.4f}")
    for path in controller.write_sweep(sweep):
        print(f"  wrote {path}")

    if sweep.failed_stages:
        print(f"✗ Failed stages: {sweep.failed_stages}")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_validate(args, settings: RuntimeSettings):
    """Run the invariant suite."""
    if args.lattice_dump:
        with open(args.lattice_dump, "r") as f:
            lattice = export.read_lattice_dump(f)
        reports = run_selfcheck(lattice=lattice, dense_cap=settings.dense_cap)
    else:
        reports = run_selfcheck(stage=StageConfig(args.dim, args.stage), dense_cap=settings.dense_cap)

    passed = True
    for report in reports:
        print(f"{report.subject}:")
        for check in report.checks:
            mark = "✓" if check.passed else "✗"
            detail = f" ({check.detail})" if check.detail else ""
            print(f"  {mark} {check.name}{detail}")
        passed = passed and report.passed

    if not passed:
        print("\nValidation failed")
        return EXIT_VALIDATION
    print("\nAll checks passed!")
    return EXIT_OK


def cmd_spectrum(args, settings: RuntimeSettings):
    """Diagonalize a small walk operator."""
    if args.hypercubic:
        d, L = args.hypercubic
        report = hypercubic_spectrum_check(d, L, cap=settings.dense_cap)
    else:
        report = gasket_spectrum(build_gasket(StageConfig(args.dim, args.stage)), cap=settings.dense_cap)

    print(f"{report.descriptor}: {report.eigenvalues.size} eigenvalues")
    print(f"  max ||lambda| - 1|: {report.max_modulus_deviation:.2e}")
    if report.matched is not None:
        print(f"  closed form match: {report.matched} (max distance {report.max_match_distance:.2e})")
    if report.conjugate_closed is not None:
        print(f"  closed under conjugation: {report.conjugate_closed}")
        print(f"  uniform state residual: {report.uniform_residual:.2e}")
    if args.out:
        export.write_spectrum(args.out, report.eigenvalues)
        print(f"  wrote {args.out}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _add_lattice_args(parser: argparse.ArgumentParser, dim_default: Optional[int] = 2):
    parser.add_argument('--dim', type=int, choices=[2, 3], default=dim_default, help='Embedding dimension d_E')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fractal-search',
        description="Quantum spatial search on Sierpinski gaskets",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose output')
    parser.add_argument('--config', help='Experiment config JSON')
    parser.add_argument('--settings', help='Runtime settings JSON')

    subparsers = parser.add_subparsers(dest='command', help='Commands')

    info = subparsers.add_parser('lattice-info', help='Show lattice size, dimensions and vertex types')
    _add_lattice_args(info)
    info.add_argument('--stage', type=int, required=True, help='Gasket stage S')
    info.add_argument('--dump', help="Write the lattice dump to a file ('-' for stdout)")

    search = subparsers.add_parser('search', help='Run the search on one stage')
    _add_lattice_args(search, dim_default=None)
    search.add_argument('--stage', type=int, required=True, help='Gasket stage S')
    search.add_argument('--t1', type=int, help='Walk steps per oracle call')
    search.add_argument('--t1-scan', type=lambda s: [int(x) for x in s.split(',')],
                        help='Comma-separated t1 values to compare, e.g. 1,2,3')
    search.add_argument('--ancilla', action='store_true', help='Add the calibrated controlled run')
    search.add_argument('--marked', help="'center', 'corner' or a vertex id")
    search.add_argument('--horizon', type=int, help='Oracle calls for the plain run')
    search.add_argument('--snapshot', action='store_true', help='Write per-vertex probability at the peak')
    search.add_argument('--out', help='Output directory')

    sweep = subparsers.add_parser('sweep', help='Run a stage range and fit the scaling laws')
    _add_lattice_args(sweep, dim_default=None)
    sweep.add_argument('--stages', help="Stage range, e.g. '4-10' or '4,6,8'")
    sweep.add_argument('--t1', type=int, help='Walk steps per oracle call')
    sweep.add_argument('--ancilla', action='store_true', help='Add calibrated controlled runs')
    sweep.add_argument('--marked', help="'center', 'corner' or a vertex id")
    sweep.add_argument('--fit-from', type=int, help='First stage entering the fits')
    sweep.add_argument('--workers', type=int, help='Parallel stages')
    sweep.add_argument('--out', help='Output directory')

    check = subparsers.add_parser('validate', help='Run lattice, walk and spectral checks')
    _add_lattice_args(check)
    check.add_argument('--stage', type=int, default=4, help='Gasket stage S')
    check.add_argument('--lattice-dump', help='Validate a lattice read from a dump file instead')

    spectrum = subparsers.add_parser('spectrum', help='Diagonalize a small walk operator')
    _add_lattice_args(spectrum)
    spectrum.add_argument('--stage', type=int, default=2, help='Gasket stage S')
    spectrum.add_argument('--hypercubic', type=int, nargs=2, metavar=('D', 'L'),
                          help='Check the periodic hypercubic lattice against its closed form')
    spectrum.add_argument('--out', help='Spectrum CSV path')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = load_settings(args.settings)
    setup_logging(args.verbose, settings)

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    commands = {
        'lattice-info': cmd_lattice_info,
        'search': cmd_search,
        'sweep': cmd_sweep,
        'validate': cmd_validate,
        'spectrum': cmd_spectrum,
    }

    try:
        return commands[args.command](args, settings)
    except (ValidationError, SizeCapExceeded, InvalidVertexError) as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    except FractalSearchError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}")
        return EXIT_FAILURE
    except ValueError as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        print(f"Error: {e}")
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
