"""Pinned reference runs and their tolerant comparison.

A golden directory holds ``config.ini``, the iteration log ``log.csv``, the
convexity report ``convexity.csv`` and ``tolerances.meta`` with one relative
tolerance per column.
"""
import csv
import dataclasses
import logging
import math
import shutil
import tempfile

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .analysis import convexity_sweep, write_report
from .config import RunConfig, dump_config, load_config
from .errors import NumericalError, StorageError
from .metadata import read_metadata, write_metadata
from .pipeline import CONFIG_NAME, LOG_NAME, SERIES_DIR, reconstruct, simulate
from .tcc import build_kernels

logger = logging.getLogger(__name__)

TOLERANCES_NAME = "tolerances.meta"
CONVEXITY_NAME = "convexity.csv"
ABSOLUTE_FLOOR = 1e-12

DEFAULT_TOLERANCES: Dict[str, float] = {
    "iteration": 0.0,
    "total_energy": 1e-6,
    "data_term": 1e-6,
    "regularizer": 1e-6,
    "step": 1e-6,
    "grad_norm_wave": 1e-5,
    "grad_norm_trans": 1e-5,
    "trans_err_sup_px": 1e-4,
    "trans_err_euc_px": 1e-4,
    "wave_err_sup": 1e-4,
    "wave_err_euc": 1e-4,
    "width_dv": 0.0,
    "c2": 1e-8,
    "limit": 1e-8,
    "relative_gap": 1e-6,
}

Table = List[Dict[str, str]]


@dataclass(frozen=True)
class GoldenArtifact:
    """A pinned run.

    Attributes:
        directory (Path): Golden directory.
        config (RunConfig): Config the run used.
        log (Table): Expected iteration log rows.
        convexity (Table): Expected convexity report rows.
        tolerances (Dict[str, float]): Relative tolerance per column.
    """

    directory: Path
    config: RunConfig
    log: Table
    convexity: Table
    tolerances: Dict[str, float]


@dataclass(frozen=True)
class Mismatch:
    """A cell outside its tolerance.

    Attributes:
        table (str): File name.
        row (int): Data row index.
        column (str): Column name.
        expected (str): Golden cell.
        actual (str): Compared cell.
    """

    table: str
    row: int
    column: str
    expected: str
    actual: str


def read_table(path: Union[str, Path]) -> Table:
    """Read a CSV file into rows keyed by header.

    Args:
        path (Union[str, Path]): CSV file.

    Returns:
        Table: Rows.

    Raises:
        StorageError: If the file cannot be read.
    """
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            return [dict(row) for row in csv.DictReader(handle)]
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e


def _run_once(config: RunConfig, root: Path) -> Tuple[bytes, bytes]:
    simulation = simulate(config, root)
    result = reconstruct(config, root / SERIES_DIR, directory=root / "reconstruction")
    kernels = build_kernels(simulation.series.spec, simulation.series.foci_nm, simulation.series.params,
                            config.run.n_focal)
    write_report(convexity_sweep(simulation.series, kernels), root / CONVEXITY_NAME)
    return (result.directory / LOG_NAME).read_bytes(), (root / CONVEXITY_NAME).read_bytes()


def regen_golden(config: Union[RunConfig, str, Path], directory: Union[str, Path],
                 tolerances: Optional[Mapping[str, float]] = None) -> GoldenArtifact:
    """Run the config twice in deterministic mode and pin the outputs.

    Args:
        config (Union[RunConfig, str, Path]): Config or config file.
        directory (Union[str, Path]): Golden directory, overwritten.
        tolerances (Optional[Mapping[str, float]]): Per-column relative tolerances (defaults when None).

    Returns:
        GoldenArtifact: The new golden.

    Raises:
        NumericalError: If the two runs differ.
    """
    cfg = config if isinstance(config, RunConfig) else load_config(config)
    cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, deterministic=True))
    out = Path(directory)
    with tempfile.TemporaryDirectory(prefix="exit-wave-golden-") as scratch:
        first = _run_once(cfg, Path(scratch) / "a")
        second = _run_once(cfg, Path(scratch) / "b")
        if first != second:
            raise NumericalError("two deterministic runs produced different outputs; refusing to pin a golden")
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / CONFIG_NAME).write_text(dump_config(cfg), encoding="utf-8")
            (out / LOG_NAME).write_bytes(first[0])
            shutil.copyfile(Path(scratch) / "a" / CONVEXITY_NAME, out / CONVEXITY_NAME)
        except OSError as e:
            raise StorageError(f"cannot write golden {out}: {e}") from e
    write_metadata(out / TOLERANCES_NAME, dict(tolerances or DEFAULT_TOLERANCES))
    logger.info("regenerated golden %s", out)
    return load_golden(out)


def load_golden(directory: Union[str, Path]) -> GoldenArtifact:
    """Read a golden directory.

    Args:
        directory (Union[str, Path]): Golden directory.

    Returns:
        GoldenArtifact: The golden.
    """
    root = Path(directory)
    tolerances = {key: float(value) for key, value in read_metadata(root / TOLERANCES_NAME).items()}
    return GoldenArtifact(root, load_config(root / CONFIG_NAME), read_table(root / LOG_NAME),
                          read_table(root / CONVEXITY_NAME), tolerances)


def _cell_matches(expected: str, actual: str, tolerance: float) -> bool:
    if expected == actual:
        return True
    if not expected or not actual:
        return False
    a, b = float(expected), float(actual)
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= max(tolerance * max(abs(a), abs(b)), ABSOLUTE_FLOOR if tolerance > 0 else 0.0)


def compare_tables(expected: Sequence[Mapping[str, str]], actual: Sequence[Mapping[str, str]],
                   tolerances: Mapping[str, float], name: str = "table") -> List[Mismatch]:
    """Cells of actual outside the per-column tolerance of expected.

    A row-count difference is reported as a mismatch on the pseudo-column ``rows``.

    Args:
        expected (Sequence[Mapping[str, str]]): Golden rows.
        actual (Sequence[Mapping[str, str]]): Rows to check.
        tolerances (Mapping[str, float]): Relative tolerance per column; missing columns must match exactly.
        name (str): Table name for the report.

    Returns:
        List[Mismatch]: Empty when everything agrees.
    """
    mismatches: List[Mismatch] = []
    if len(expected) != len(actual):
        mismatches.append(Mismatch(name, -1, "rows", str(len(expected)), str(len(actual))))
    for index, (want, got) in enumerate(zip(expected, actual)):
        for column, cell in want.items():
            other = got.get(column, "")
            if not _cell_matches(cell, other, tolerances.get(column, 0.0)):
                mismatches.append(Mismatch(name, index, column, cell, other))
    return mismatches


def compare_golden(log_path: Union[str, Path], golden: GoldenArtifact,
                   convexity_path: Optional[Union[str, Path]] = None) -> List[Mismatch]:
    """Compare a fresh run against a golden.

    Args:
        log_path (Union[str, Path]): Iteration log of the fresh run.
        golden (GoldenArtifact): Pinned run.
        convexity_path (Optional[Union[str, Path]]): Convexity report of the fresh run, if produced.

    Returns:
        List[Mismatch]: Empty when the run matches.
    """
    mismatches = compare_tables(golden.log, read_table(log_path), golden.tolerances, LOG_NAME)
    if convexity_path is not None:
        mismatches += compare_tables(golden.convexity, read_table(convexity_path), golden.tolerances,
                                     CONVEXITY_NAME)
    for m in mismatches:
        logger.warning("golden mismatch in %s row %d column %s: expected %s, got %s",
                       m.table, m.row, m.column, m.expected, m.actual)
    return mismatches


def check_golden(directory: Union[str, Path]) -> List[Mismatch]:
    """Rerun a golden's own config deterministically and compare both tables.

    Args:
        directory (Union[str, Path]): Golden directory.

    Returns:
        List[Mismatch]: Empty when the fresh run matches the golden.
    """
    golden = load_golden(directory)
    cfg = dataclasses.replace(golden.config, run=dataclasses.replace(golden.config.run, deterministic=True))
    with tempfile.TemporaryDirectory(prefix="exit-wave-check-") as scratch:
        root = Path(scratch)
        _run_once(cfg, root)
        return compare_golden(root / "reconstruction" / LOG_NAME, golden, root / CONVEXITY_NAME)
