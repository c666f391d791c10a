"""Simulate and reconstruct runs driven by a :class:`~exit_wave.config.RunConfig`.

Output layout under the run directory::

    config.ini            the effective config
    series/               image_NNN fields + manifest
    truth/                wave field + manifest with the true translations
    reconstruction/       wave field + manifest with translations and stop reason
    reconstruction/log.csv
"""
import datetime
import hashlib
import logging
import math

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

from .config import RunConfig, dump_config
from .errors import StorageError
from .fields import ComplexField, Space
from .forward import FocusSeries, crop_wave, load_series, make_synthetic_wave, save_series, simulate_series
from .metadata import Metadata, require
from .objective import Objective, ReconstructionVariables, RegularizerSpec
from .optimizer import GroundTruth, IterationRecord, Minimizer, StopReason, initial_variables, write_log
from .storage import FieldStore
from .tcc import build_kernels

logger = logging.getLogger(__name__)

SERIES_DIR = "series"
TRUTH_DIR = "truth"
RECONSTRUCTION_DIR = "reconstruction"
LOG_NAME = "log.csv"
CONFIG_NAME = "config.ini"
EPOCH = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of :func:`simulate`.

    Attributes:
        series (FocusSeries): Simulated data with true translations.
        truth (GroundTruth): Cropped wave and translations.
        directory (Path): Run directory.
    """

    series: FocusSeries
    truth: GroundTruth
    directory: Path


@dataclass(frozen=True)
class ReconstructionResult:
    """Outcome of :func:`reconstruct`.

    Attributes:
        variables (ReconstructionVariables): Final wave and translations.
        records (List[IterationRecord]): Iteration log.
        stop_reason (StopReason): Why the solver stopped.
        directory (Path): Reconstruction directory.
    """

    variables: ReconstructionVariables
    records: List[IterationRecord]
    stop_reason: StopReason
    directory: Path


def timestamp(config: RunConfig) -> str:
    """UTC timestamp for manifests, the epoch in deterministic mode.

    Args:
        config (RunConfig): Run config.

    Returns:
        str: ISO 8601 time.
    """
    if config.run.deterministic:
        return EPOCH
    now = datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)
    return now.isoformat().replace("+00:00", "Z")


def config_digest(config: RunConfig) -> str:
    """SHA-256 of the rendered config.

    Args:
        config (RunConfig): Run config.

    Returns:
        str: Hex digest.
    """
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()


def _run_metadata(config: RunConfig) -> Metadata:
    return {"created_utc": timestamp(config), "config_sha256": config_digest(config), "seed": config.run.seed}


def _write_config(config: RunConfig, directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / CONFIG_NAME).write_text(dump_config(config), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {directory / CONFIG_NAME}: {e}") from e


def save_truth(truth: GroundTruth, directory: Union[str, Path], extra: Optional[Metadata] = None) -> FieldStore:
    """Write the true wave and translations.

    Args:
        truth (GroundTruth): Reference solution.
        directory (Union[str, Path]): Output directory.
        extra (Optional[Metadata]): Additional manifest entries.

    Returns:
        FieldStore: Store holding ``wave``.
    """
    store = FieldStore(directory, create=True)
    store["wave"] = truth.psi
    store.write_manifest(dict(extra or {}, translations_nm=truth.translations_nm))
    return store


def load_truth(directory: Union[str, Path]) -> GroundTruth:
    """Read a reference solution written by :func:`save_truth`.

    Args:
        directory (Union[str, Path]): Truth directory.

    Returns:
        GroundTruth: Wave and translations.

    Raises:
        StorageError: If the wave or manifest is missing or malformed.
    """
    store = FieldStore(directory)
    try:
        psi = store["wave"]
    except KeyError as e:
        raise StorageError(f"{store.directory}: no wave field") from e
    if not isinstance(psi, ComplexField) or psi.space is not Space.FOURIER:
        raise StorageError(f"{store.directory}: the wave must be a Fourier-space complex field")
    translations = require(store.read_manifest(), "translations_nm", tuple, store.manifest_path())
    return GroundTruth(psi, tuple((float(t[0]), float(t[1])) for t in translations))


def build_series(config: RunConfig) -> Tuple[FocusSeries, GroundTruth]:
    """Simulate the configured series in memory.

    Args:
        config (RunConfig): Validated config.

    Returns:
        Tuple[FocusSeries, GroundTruth]: Series on the configured grid and its reference solution.
    """
    grid, optics = config.grid, config.optics
    wave = config.wave.build(grid.extent_nm)
    period = wave.period_nm or grid.extent_nm
    cycles = grid.extent_nm / period
    if not math.isclose(cycles, round(cycles), rel_tol=1e-9):
        logger.warning("field of view %.4g nm is not a multiple of the wave period %.4g nm; "
                       "the cropped series is not periodic", grid.extent_nm, period)
    psi_large = make_synthetic_wave(grid.doubled(), wave, optics)
    series = simulate_series(psi_large, config.series.foci(), config.series.drifts(), optics,
                             config.run.n_focal, config.series.noise(config.run.seed))
    return series, GroundTruth(crop_wave(psi_large, grid, optics), series.translations_nm)


def simulate(config: RunConfig, directory: Optional[Union[str, Path]] = None) -> SimulationResult:
    """Simulate the configured series on the doubled grid and write it with its ground truth.

    Args:
        config (RunConfig): Validated config.
        directory (Optional[Union[str, Path]]): Run directory (``config.run.output`` when None).

    Returns:
        SimulationResult: Series, truth and run directory.
    """
    root = Path(directory or config.run.output)
    series, truth = build_series(config)
    meta = _run_metadata(config)
    _write_config(config, root)
    save_series(series, root / SERIES_DIR, meta)
    save_truth(truth, root / TRUTH_DIR, meta)
    logger.info("simulated %d image(s) on %dx%d (from the doubled grid) into %s",
                len(series), config.grid.n, config.grid.n, root)
    return SimulationResult(series, truth, root)


def reconstruct(config: RunConfig, series_dir: Union[str, Path], truth_dir: Optional[Union[str, Path]] = None,
                directory: Optional[Union[str, Path]] = None) -> ReconstructionResult:
    """Reconstruct wave and translations from a series on disk.

    Args:
        config (RunConfig): Validated config (solver and run sections are used).
        series_dir (Union[str, Path]): Series written by :func:`simulate` or :func:`save_series`.
        truth_dir (Optional[Union[str, Path]]): Reference solution for the error columns; a ``truth``
            directory next to the series is used when present.
        directory (Optional[Union[str, Path]]): Output directory (``<run output>/reconstruction`` when None).

    Returns:
        ReconstructionResult: Final point, log and stop reason.

    Raises:
        StorageError: If the series grid disagrees with the config.
    """
    series = load_series(series_dir)
    if series.spec != config.grid:
        raise StorageError(f"series grid {series.spec} does not match the configured grid {config.grid}")
    if series.params != config.optics:
        logger.warning("series optics %s differ from the config; using the series values", series.params)
    truth_path = Path(truth_dir) if truth_dir is not None else Path(series_dir).parent / TRUTH_DIR
    truth = load_truth(truth_path) if (truth_path / "wave.meta").is_file() else None
    kernels = build_kernels(series.spec, series.foci_nm, series.params, config.run.n_focal)
    objective = Objective(series, kernels, RegularizerSpec(config.solver.alpha))
    start = initial_variables(series, config.run.subpixel)
    minimizer = Minimizer(objective, config.solver, truth)
    final, records = minimizer.run(start)
    stop = minimizer.stop_reason or StopReason.MAX_ITERATIONS
    out = Path(directory) if directory is not None else Path(config.run.output) / RECONSTRUCTION_DIR
    store = FieldStore(out, create=True)
    store["wave"] = final.psi
    last = records[-1].energy
    manifest = dict(_run_metadata(config),
                    stop_reason=stop.value,
                    iterations=records[-1].iteration,
                    restarts=minimizer.restarts,
                    total_energy=last.total,
                    data_term=last.data_term,
                    regularizer=last.regularizer,
                    translations_nm=final.translations_nm,
                    translation_scale_nm=minimizer.scale)
    store.write_manifest(manifest)
    write_log(records, out / LOG_NAME)
    logger.info("reconstruction finished (%s) after %d iteration(s); results in %s",
                stop.value, records[-1].iteration, out)
    return ReconstructionResult(final, records, stop, out)
