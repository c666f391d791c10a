"""Numerical probes of the reconstruction problem.

Each probe returns a :class:`ProbeReport`: a table of measurements plus a
PASS/FAIL verdict against a stated criterion. Reports are written as CSV and
summarised as text by the command line.
"""
import csv
import logging
import math

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from scipy import fft

from .errors import StorageError, ValidationError
from .fields import ComplexField, GridSpec, RealArray, Space, modulation_phase, spectral_transform
from .forward import FocusSeries
from .objective import Objective
from .optimizer import init_wave
from .tcc import (
    FactorizedKernel,
    OpticalParams,
    _focal_factors,
    focal_quadrature,
    focus_density,
    riemann_quadrature,
    riemann_tcc,
    source_density,
    tcc_ishizuka_eval,
)
from .wcc import xcorr_spectral

logger = logging.getLogger(__name__)

Row = Dict[str, float]

INVARIANCE_TOLERANCE = 1e-10
REFERENCE_TOLERANCE = 1e-4
REFERENCE_DELTA = 100.0
TAIL_LIMIT = 1e-6
SQUARE_BAND = (0.25, 4.0)
LOW_PASS_CUTOFF = 0.5
ORACLE_REFERENCE_M = 20


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of one probe.

    Attributes:
        name (str): Probe name.
        criterion (str): What PASS means.
        columns (Tuple[str, ...]): Column order of the rows.
        rows (Tuple[Row, ...]): Measurements.
        passed (bool): Verdict.
        notes (Tuple[str, ...]): Free-form remarks (refusals, limits).
    """

    name: str
    criterion: str
    columns: Tuple[str, ...]
    rows: Tuple[Row, ...]
    passed: bool
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def verdict(self) -> str:
        """``PASS`` or ``FAIL``."""
        return "PASS" if self.passed else "FAIL"


def write_report(report: ProbeReport, path: Union[str, Path]) -> None:
    """Write the report rows as CSV with a header line.

    Args:
        report (ProbeReport): Report to write.
        path (Union[str, Path]): Output file.

    Raises:
        StorageError: If the file cannot be written.
    """
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(report.columns)
            for row in report.rows:
                writer.writerow([repr(float(row[c])) for c in report.columns])
    except OSError as e:
        raise StorageError(f"cannot write probe report {path}: {e}") from e


def format_summary(report: ProbeReport) -> str:
    """Human-readable summary ending in the verdict line.

    Args:
        report (ProbeReport): Report to summarise.

    Returns:
        str: Multi-line text.
    """
    lines = [f"probe: {report.name}", f"criterion: {report.criterion}", "  ".join(report.columns)]
    lines.extend("  ".join(f"{row[c]:.6g}" for c in report.columns) for row in report.rows)
    lines.extend(f"note: {note}" for note in report.notes)
    lines.append(f"verdict: {report.verdict}")
    return "\n".join(lines)


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def _non_increasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


# coercivity counterexample


@dataclass(frozen=True)
class LineSampling:
    """Uniform 1-D sampling for the coercivity probe.

    Attributes:
        step (float): Sample spacing; at most 0.125 so the sampled ‖g_δ‖² is within
            the reference tolerance of ln δ.
        margin (float): Zero padding appended before the FFT low-pass, in units of x.
    """

    step: float = 0.125
    margin: float = float(2 ** 20)

    def __post_init__(self) -> None:
        """Validate the sampling.

        Raises:
            ValidationError: If step is not in (0, 0.125] or the margin is not positive.
        """
        if not (math.isfinite(self.step) and 0.0 < self.step <= 0.125):
            raise ValidationError(f"sampling step must be in (0, 0.125], got {self.step!r}")
        if not (math.isfinite(self.margin) and self.margin > 0.0):
            raise ValidationError(f"padding margin must be positive, got {self.margin!r}")


def cell_averaged_profile(edges: RealArray, delta: float) -> RealArray:
    """Cell averages of g_δ(x) = x^(-1/2) on [1, δ], zero elsewhere.

    Args:
        edges (RealArray): Increasing cell edges, one more than the cells.
        delta (float): Upper end δ > 1.

    Returns:
        RealArray: Average of g_δ over each cell.
    """
    lo = np.clip(edges[:-1], 1.0, delta)
    hi = np.clip(edges[1:], 1.0, delta)
    return np.asarray(2.0 * (np.sqrt(hi) - np.sqrt(lo)) / np.diff(edges), dtype=np.float64)


def tail_estimate(samples: RealArray, margin: float) -> float:
    """Wrap-around error bound of the padded low-pass at distance ``margin``.

    Integrating by parts against the sine-integral tail, a profile of total
    variation V contributes at most 2V/(π² d) at distance d from its support.

    Args:
        samples (RealArray): Profile samples, zero outside the support.
        margin (float): Zero padding between the profile and its periodic copy.

    Returns:
        float: Pointwise bound on the contamination from the nearest copy.
    """
    variation = float(np.sum(np.abs(np.diff(samples, prepend=0.0, append=0.0))))
    return 2.0 * variation / (math.pi ** 2 * margin)


def _check_deltas(deltas: Sequence[float]) -> Tuple[float, ...]:
    values = tuple(float(d) for d in deltas)
    if len(values) < 2:
        raise ValidationError("the coercivity probe needs at least two widths")
    if not all(math.isfinite(d) and d > 1.0 for d in values) or not _strictly_increasing(values):
        raise ValidationError(f"widths must be finite, above 1 and increasing, got {values!r}")
    return values


def _low_pass(samples: RealArray, size: int, step: float) -> RealArray:
    spectrum = fft.rfft(samples, n=size)
    spectrum[fft.rfftfreq(size, d=step) > LOW_PASS_CUTOFF] = 0.0
    return np.asarray(fft.irfft(spectrum, n=size)[:samples.size], dtype=np.float64)


def coercivity_probe(deltas: Sequence[float] = (10.0, 100.0, 1000.0),
                     sampling: LineSampling = LineSampling()) -> ProbeReport:
    """Band-limited family with growing norm and bounded squared norm.

    For each δ the profile x^(-1/2) on [1, δ] is low-passed to |ξ| ≤ 1/2. Its
    squared norm grows like ln δ while the norm of its pointwise square stays
    bounded, so no bound ‖f²‖ ≥ c‖f‖² can hold on the band-limited space.

    Before filtering, the sampled profile at δ = 100 must reproduce ‖g_δ‖² = ln δ.

    Args:
        deltas (Sequence[float]): Increasing widths above 1.
        sampling (LineSampling): Sampling of the line.

    Returns:
        ProbeReport: Rows of δ, ‖f‖², ‖f²‖, ln δ and the tail bound.

    Raises:
        ValidationError: On invalid widths or when the circular tail bound is too large.
    """
    widths = _check_deltas(deltas)
    start = -4.0
    stop = 4.0 * max(widths[-1], REFERENCE_DELTA)
    count = int(math.ceil((stop - start) / sampling.step))
    edges = start + sampling.step * np.arange(count + 1)
    size = fft.next_fast_len(count + int(math.ceil(sampling.margin / sampling.step)), real=True)
    margin = (size - count) * sampling.step

    reference = float(np.sum(cell_averaged_profile(edges, REFERENCE_DELTA) ** 2) * sampling.step)
    reference_ok = abs(reference - math.log(REFERENCE_DELTA)) <= REFERENCE_TOLERANCE * math.log(REFERENCE_DELTA)

    rows: List[Row] = []
    notes: List[str] = []
    for delta in widths:
        g = cell_averaged_profile(edges, delta)
        tail = tail_estimate(g, margin)
        if tail > TAIL_LIMIT:
            raise ValidationError(f"circular tail estimate {tail:.3g} exceeds {TAIL_LIMIT}; widen the margin")
        f = _low_pass(g, size, sampling.step)
        norm2 = float(np.sum(f * f) * sampling.step)
        square = float(math.sqrt(np.sum(f ** 4) * sampling.step))
        rows.append({"delta": delta, "norm_sq": norm2, "square_norm": square,
                     "log_delta": math.log(delta), "tail_bound": tail})
        logger.debug("coercivity δ=%g: ‖f‖²=%.6g ‖f²‖=%.6g", delta, norm2, square)
    norms = [r["norm_sq"] for r in rows]
    squares = [r["square_norm"] for r in rows]
    in_band = all(SQUARE_BAND[0] <= s <= SQUARE_BAND[1] for s in squares)
    if not reference_ok:
        notes.append(f"sampled ‖g‖² at δ = {REFERENCE_DELTA:g} is {reference:.10g}, expected ln δ")
    if not in_band:
        notes.append(f"squared norms leave [{SQUARE_BAND[0]}, {SQUARE_BAND[1]}]")
    passed = reference_ok and in_band and _strictly_increasing(norms)
    return ProbeReport(
        name="coercivity",
        criterion="‖f‖² strictly increasing while ‖f²‖ stays in a fixed band",
        columns=("delta", "norm_sq", "square_norm", "log_delta", "tail_bound"),
        rows=tuple(rows), passed=passed, notes=tuple(notes))


def coercivity_probe_2d(deltas: Sequence[float] = (4.0, 8.0, 16.0),
                        spec: GridSpec = GridSpec(32, 32.0)) -> ProbeReport:
    """Lattice version of :func:`coercivity_probe` using the spectral cross-correlation.

    The profile is placed on the center row, transformed, and compared with its own
    autocorrelation: ‖h ⋆ h‖ / ‖h‖² must shrink as δ grows.

    Args:
        deltas (Sequence[float]): Increasing widths above 1.
        spec (GridSpec): Lattice.

    Returns:
        ProbeReport: Rows of δ, ‖h‖, ‖h⋆h‖ and their ratio.
    """
    widths = _check_deltas(deltas)
    x = spec.axis(Space.REAL)
    edges = np.concatenate([x - 0.5 * spec.pixel_size, x[-1:] + 0.5 * spec.pixel_size])
    rows: List[Row] = []
    for delta in widths:
        values = np.zeros((spec.n, spec.n), dtype=np.complex128)
        values[spec.center, :] = cell_averaged_profile(edges, delta)
        h = spectral_transform(ComplexField(spec, values, Space.REAL))
        norm = float(math.sqrt(np.vdot(h.values, h.values).real * spec.cell_area(Space.FOURIER)))
        auto = xcorr_spectral(h, h)
        auto_norm = float(math.sqrt(np.vdot(auto.values, auto.values).real * spec.cell_area(Space.FOURIER)))
        rows.append({"delta": delta, "norm": norm, "autocorrelation_norm": auto_norm,
                     "ratio": auto_norm / norm ** 2})
    passed = (_strictly_increasing([r["norm"] for r in rows])
              and _strictly_increasing([-r["ratio"] for r in rows]))
    return ProbeReport(
        name="coercivity-2d",
        criterion="‖h‖ increasing and ‖h⋆h‖/‖h‖² decreasing",
        columns=("delta", "norm", "autocorrelation_norm", "ratio"),
        rows=tuple(rows), passed=passed)


# factorization accuracy


def _pairs_in_aperture(p: OpticalParams, count: int, seed: int) -> Tuple[RealArray, RealArray]:
    rng = np.random.default_rng(seed)

    def draw() -> RealArray:
        radius = p.aperture_radius * np.sqrt(rng.uniform(0.0, 1.0, count))
        angle = rng.uniform(0.0, 2.0 * math.pi, count)
        return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)

    return draw(), draw()


def factorization_sweep(z_nm: float, p: OpticalParams, node_counts: Sequence[int] = (3, 7, 15),
                        path: str = "production", pairs: int = 1000, seed: int = 0) -> ProbeReport:
    """Worst-case error of a factorized kernel against its reference on random in-aperture pairs.

    ``production`` compares focal quadratures with n nodes against the closed-form
    rank-one TCC; ``oracle`` compares the Riemann oracle with half count m against a
    finer one (m = 20) on the same truncated domain.

    Args:
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants.
        node_counts (Sequence[int]): Node counts (production) or half counts (oracle), increasing.
        path (str): ``production`` or ``oracle``.
        pairs (int): Number of random (v, w) pairs.
        seed (int): Seed of the pair generator.

    Returns:
        ProbeReport: Rows of count and maximum absolute error; PASS when the error never grows.

    Raises:
        ValidationError: On an unknown path or an empty sweep.
    """
    if path not in ("production", "oracle"):
        raise ValidationError(f"unknown factorization path {path!r}")
    if not node_counts or pairs < 1:
        raise ValidationError("the sweep needs node counts and at least one pair")
    v, w = _pairs_in_aperture(p, pairs, seed)
    rows: List[Row] = []
    if path == "production":
        exact = tcc_ishizuka_eval(v, w, z_nm, p, rank_one=True)
        for count in node_counts:
            nodes, weights = focal_quadrature(p.delta_nm, count)
            tv = _focal_factors(v, z_nm, p, nodes, weights)
            tw = _focal_factors(w, z_nm, p, nodes, weights)
            approx = np.sum(tv * np.conj(tw), axis=0)
            rows.append({"count": float(count), "max_error": float(np.max(np.abs(approx - exact)))})
    else:
        s, f = source_density(p), focus_density(p)
        exact = riemann_tcc(v, w, z_nm, p, riemann_quadrature(ORACLE_REFERENCE_M, s, f))
        for count in node_counts:
            approx = riemann_tcc(v, w, z_nm, p, riemann_quadrature(count, s, f))
            rows.append({"count": float(count), "max_error": float(np.max(np.abs(approx - exact)))})
    for row in rows:
        logger.info("factorization %s count=%d error=%.3e", path, int(row["count"]), row["max_error"])
    return ProbeReport(
        name=f"factorization-{path}",
        criterion="maximum error non-increasing in the node count",
        columns=("count", "max_error"),
        rows=tuple(rows), passed=_non_increasing([r["max_error"] for r in rows]))


# invariances


def invariance_suite(series: FocusSeries, kernels: Sequence[FactorizedKernel], trials: int = 10,
                     seed: int = 0) -> ProbeReport:
    """Energy under global phases Ψ ↦ e^{ic}Ψ and joint shifts (Ψ, t) ↦ (Ψμ_s, t + s).

    Phases include c = 0; shifts include s = 0 and one pixel along the rows.
    The energy is evaluated without regularizer.

    Args:
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): One kernel per image.
        trials (int): Number of phases and of shifts, at least 2.
        seed (int): Seed for the random wave, phases and shifts.

    Returns:
        ProbeReport: One row per trial with the relative energy change.

    Raises:
        ValidationError: If trials < 2.
    """
    if trials < 2:
        raise ValidationError(f"the invariance suite needs at least 2 trials, got {trials}")
    objective = Objective(series, kernels)
    spec = series.spec
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((spec.n, spec.n)) + 1j * rng.standard_normal((spec.n, spec.n))
    psi = init_wave(series).values + 0.1 * spec.extent_nm ** 2 * noise * objective.mask
    translations = np.asarray(series.translations_nm, dtype=np.float64)
    base = objective.evaluate_arrays(psi, translations, need_gradients=False).energy.total
    scale = abs(base) or 1.0
    phases = [0.0] + list(rng.uniform(0.0, 2.0 * math.pi, trials - 1))
    shifts: List[Tuple[float, ...]] = [(0.0, 0.0), (spec.pixel_size, 0.0)]
    shifts += [tuple(float(c) for c in rng.uniform(-0.25, 0.25, 2) * spec.extent_nm) for _ in range(trials - 2)]
    rows: List[Row] = []
    for c in phases:
        energy = objective.evaluate_arrays(psi * np.exp(1j * c), translations, False).energy.total
        rows.append({"kind": 0.0, "phase": c, "shift_row_nm": 0.0, "shift_col_nm": 0.0,
                     "relative_change": abs(energy - base) / scale})
    for s in shifts:
        moved = psi * modulation_phase(spec, s)
        energy = objective.evaluate_arrays(moved, translations + np.asarray(s), False).energy.total
        rows.append({"kind": 1.0, "phase": 0.0, "shift_row_nm": float(s[0]), "shift_col_nm": float(s[1]),
                     "relative_change": abs(energy - base) / scale})
    worst = max(r["relative_change"] for r in rows)
    logger.info("invariance suite: worst relative change %.3e", worst)
    return ProbeReport(
        name="invariance",
        criterion=f"relative energy change at most {INVARIANCE_TOLERANCE:g} (kind 0 phase, 1 shift)",
        columns=("kind", "phase", "shift_row_nm", "shift_col_nm", "relative_change"),
        rows=tuple(rows), passed=worst <= INVARIANCE_TOLERANCE)


# convexity at the origin


def convexity_sweep(series: FocusSeries, kernels: Sequence[FactorizedKernel],
                    widths: Sequence[float] = (2.0, 1.0, 0.5, 0.25)) -> ProbeReport:
    """Second line coefficient at Ψ = 0 along ever narrower bumps.

    A negative coefficient means the energy is not convex at the origin. Widths are
    in units of the frequency spacing; the last one is compared with the
    narrow-bump limit -(2/N)Σ‖g_j‖_L¹.

    Args:
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): One kernel per image.
        widths (Sequence[float]): Bump widths in frequency spacings, decreasing.

    Returns:
        ProbeReport: Rows of width, C², the limit and the relative gap; PASS only when every C² ≥ 0.

    Raises:
        ValidationError: If no widths are given.
    """
    if not widths:
        raise ValidationError("the convexity sweep needs at least one width")
    objective = Objective(series, kernels)
    limit = objective.l1_limit()
    dv = series.spec.frequency_spacing
    rows: List[Row] = []
    for width in widths:
        c2 = objective.convexity_probe(float(width) * dv)
        gap = abs(c2 - limit) / abs(limit) if limit != 0.0 else abs(c2)
        rows.append({"width_dv": float(width), "c2": c2, "limit": limit, "relative_gap": gap})
        logger.info("convexity width=%g dv: C²=%.6g (limit %.6g)", width, c2, limit)
    notes = []
    if limit != 0.0 and rows[-1]["relative_gap"] > 0.05:
        notes.append("narrowest bump is more than 5% away from the L¹ limit")
    return ProbeReport(
        name="convexity",
        criterion="C² ≥ 0 for every width (convex at the origin)",
        columns=("width_dv", "c2", "limit", "relative_gap"),
        rows=tuple(rows), passed=all(r["c2"] >= 0.0 for r in rows), notes=tuple(notes))
