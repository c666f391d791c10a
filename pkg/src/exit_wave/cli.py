"""Command line: ``exit-wave {simulate,reconstruct,probe,info,regen-golden}``.

Exit statuses: 0 success, 2 invalid config or arguments, 3 storage error,
4 numerical failure, 5 probe verdict FAIL, 6 solver stopped without converging.
"""
import argparse
import logging
import sys

from pathlib import Path
from typing import List, Optional, Sequence

from scipy import fft

from . import __version__
from .analysis import (ProbeReport, coercivity_probe, coercivity_probe_2d, convexity_sweep, factorization_sweep,
                       format_summary, invariance_suite, write_report)
from .config import RunConfig, apply_overrides, load_config
from .errors import NOT_CONVERGED_STATUS, PROBE_FAILED_STATUS, ExitWaveError
from .forward import FocusSeries, load_series
from .golden import regen_golden
from .metadata import dumps, read_metadata
from .optimizer import StopReason
from .pipeline import build_series, reconstruct, simulate
from .storage import MANIFEST_NAME
from .tcc import build_kernels

logger = logging.getLogger(__name__)

PROBES = ("convexity", "invariance", "coercivity", "factorization")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="INI config file (defaults apply when omitted)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("--alpha", type=float, help="regularization weight (solver.alpha)")
    common.add_argument("--freeze-translations", action="store_true", help="keep translations at their start")
    common.add_argument("--threads", type=int, help="FFT worker cap, 0 for all cores (run.threads)")
    common.add_argument("--seed", type=int, help="random seed (run.seed)")
    common.add_argument("--output", help="output directory (run.output)")
    common.add_argument("--deterministic", action="store_true", help="zero manifest timestamps")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging; repeat for debug")
    common.add_argument("-q", "--quiet", action="store_true", help="only errors")

    parser = argparse.ArgumentParser(prog="exit-wave",
                                     description="Focal-series exit-wave simulation and reconstruction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="simulate a drifting focal series")
    rec = commands.add_parser("reconstruct", parents=[common], help="reconstruct wave and translations")
    rec.add_argument("series", type=Path, help="series directory")
    rec.add_argument("--truth", type=Path, help="reference solution for the error columns")
    probe = commands.add_parser("probe", parents=[common], help="run a numerical probe")
    probe.add_argument("name", choices=PROBES)
    probe.add_argument("--series", type=Path, help="series directory (simulated in memory when omitted)")
    probe.add_argument("--path", choices=("production", "oracle"), default="production",
                       help="factorization path")
    probe.add_argument("--focus", type=float, help="defocus of the factorization probe (first focus by default)")
    info = commands.add_parser("info", parents=[common], help="print a directory's manifest")
    info.add_argument("directory", type=Path)
    golden = commands.add_parser("regen-golden", parents=[common], help="rewrite a golden run")
    golden.add_argument("directory", type=Path, help="golden directory")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    if args.quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then ``--set`` overrides, then dedicated flags.

    Args:
        args (argparse.Namespace): Parsed arguments.

    Returns:
        RunConfig: Validated config.
    """
    config = load_config(args.config) if args.config is not None else RunConfig()
    overrides: List[str] = list(args.overrides)
    if args.alpha is not None:
        overrides.append(f"solver.alpha={args.alpha!r}")
    if args.freeze_translations:
        overrides.append("solver.freeze_translations=true")
    if args.threads is not None:
        overrides.append(f"run.threads={args.threads}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.output is not None:
        overrides.append(f"run.output={args.output}")
    if args.deterministic:
        overrides.append("run.deterministic=true")
    return apply_overrides(config, overrides) if overrides else config


def _probe_series(config: RunConfig, directory: Optional[Path]) -> FocusSeries:
    if directory is not None:
        return load_series(directory)
    return build_series(config)[0]


def run_probe(name: str, config: RunConfig, args: argparse.Namespace) -> List[ProbeReport]:
    """Run one probe.

    Args:
        name (str): Probe name.
        config (RunConfig): Validated config.
        args (argparse.Namespace): Probe options (series, path, focus).

    Returns:
        List[ProbeReport]: Reports; coercivity yields the line and lattice versions.
    """
    if name == "coercivity":
        return [coercivity_probe(), coercivity_probe_2d()]
    if name == "factorization":
        focus = args.focus if args.focus is not None else config.series.foci()[0]
        counts = (3, 7, 15) if args.path == "production" else (4, 6, 8)
        return [factorization_sweep(focus, config.optics, counts, args.path, seed=config.run.seed)]
    series = _probe_series(config, args.series)
    kernels = build_kernels(series.spec, series.foci_nm, series.params, config.run.n_focal)
    if name == "convexity":
        return [convexity_sweep(series, kernels)]
    return [invariance_suite(series, kernels, seed=config.run.seed)]


def cmd_simulate(config: RunConfig) -> int:
    """Simulate and write a series with its ground truth.

    Args:
        config (RunConfig): Validated config.

    Returns:
        int: Exit status.
    """
    simulate(config)
    return 0


def cmd_reconstruct(config: RunConfig, series_dir: Path, truth_dir: Optional[Path] = None) -> int:
    """Reconstruct from a series on disk.

    Args:
        config (RunConfig): Validated config.
        series_dir (Path): Series directory.
        truth_dir (Optional[Path]): Reference solution.

    Returns:
        int: 0 when the solver converged, 6 when it stopped otherwise.
    """
    result = reconstruct(config, series_dir, truth_dir)
    return 0 if result.stop_reason is StopReason.CONVERGED else NOT_CONVERGED_STATUS


def cmd_probe(name: str, config: RunConfig, args: argparse.Namespace) -> int:
    """Run a probe, write its CSV under ``<output>/probes`` and print the summary.

    Args:
        name (str): Probe name.
        config (RunConfig): Validated config.
        args (argparse.Namespace): Probe options.

    Returns:
        int: 0 when every report passes, 5 otherwise.
    """
    status = 0
    for report in run_probe(name, config, args):
        write_report(report, Path(config.run.output) / "probes" / f"{report.name}.csv")
        print(format_summary(report))
        if not report.passed:
            status = PROBE_FAILED_STATUS
    return status


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "info":
        sys.stdout.write(dumps(read_metadata(args.directory / MANIFEST_NAME)))
        return 0
    config = build_config(args)
    if args.command == "regen-golden":
        regen_golden(config, args.directory)
        return 0
    with fft.set_workers(config.run.threads or -1):
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "reconstruct":
            return cmd_reconstruct(config, args.series, args.truth)
        return cmd_probe(args.name, config, args)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point.

    Args:
        argv (Optional[Sequence[str]]): Arguments without the program name (sys.argv when None).

    Returns:
        int: Exit status.
    """
    args = _parser().parse_args(argv)
    _configure_logging(args)
    try:
        return _dispatch(args)
    except ExitWaveError as e:
        logger.error("%s", e)
        return e.exit_status


if __name__ == "__main__":
    sys.exit(main())
