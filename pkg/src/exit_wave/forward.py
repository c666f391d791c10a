"""Image simulation from an exit wave and synthetic focal-series generation."""
import logging
import math

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NumericalError, StorageError, ValidationError
from .fields import (ComplexField, GridSpec, RealArray, RealField, Space, Vector, apply_mask, as_real_field,
                     band_mask, crop_center, inverse_spectral_transform, modulate, spectral_transform)
from .metadata import Metadata, require
from .storage import FieldStore
from .tcc import FactorizedKernel, OpticalParams, build_factorized_kernel
from .wcc import wcc_factorized

logger = logging.getLogger(__name__)

NONNEGATIVITY_TOLERANCE = 1e-12
REALNESS_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class FocusSeries:
    """Focal series of real-space images with their foci and translations.

    Attributes:
        images (Tuple[RealField, ...]): Images g_j on ``spec``.
        foci_nm (Tuple[float, ...]): Defocus Z_j per image.
        translations_nm (Tuple[Vector, ...]): Translation t_j per image (truth or estimate).
        params (OpticalParams): Microscope constants.
        spec (GridSpec): Image grid.
    """

    images: Tuple[RealField, ...]
    foci_nm: Tuple[float, ...]
    translations_nm: Tuple[Vector, ...]
    params: OpticalParams
    spec: GridSpec

    def __post_init__(self) -> None:
        """Check lengths, grids and sample values.

        Raises:
            ValidationError: On an empty series, length mismatch, foreign grids or negative images.
        """
        images = tuple(self.images)
        foci = tuple(float(z) for z in self.foci_nm)
        translations = tuple((float(t[0]), float(t[1])) for t in self.translations_nm)
        if not images:
            raise ValidationError("a focus series needs at least one image")
        if not len(images) == len(foci) == len(translations):
            raise ValidationError(f"series lengths differ: {len(images)} images, {len(foci)} foci, "
                                  f"{len(translations)} translations")
        if not all(math.isfinite(z) for z in foci) or not all(math.isfinite(c) for t in translations for c in t):
            raise ValidationError("foci and translations must be finite")
        for index, image in enumerate(images):
            if image.spec != self.spec or image.space is not Space.REAL:
                raise ValidationError(f"image {index} is not a real-space field on {self.spec}")
            peak = float(np.max(np.abs(image.values)))
            if float(np.min(image.values)) < -NONNEGATIVITY_TOLERANCE * peak:
                raise ValidationError(f"image {index} has negative samples below tolerance")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "foci_nm", foci)
        object.__setattr__(self, "translations_nm", translations)

    def __len__(self) -> int:
        """Number of images."""
        return len(self.images)

    def with_translations(self, translations_nm: Sequence[Vector]) -> "FocusSeries":
        """Copy of the series with other translations.

        Args:
            translations_nm (Sequence[Vector]): New translations.

        Returns:
            FocusSeries: Series sharing the images.
        """
        return FocusSeries(self.images, self.foci_nm, tuple(translations_nm), self.params, self.spec)


@dataclass(frozen=True)
class Atom:
    """Gaussian column contributing to a synthetic exit wave.

    Attributes:
        position_nm (Vector): Column position (row, column).
        phase (float): Peak phase shift in rad.
        width_nm (float): Gaussian standard deviation.
        gain (float): Relative amplitude change at the peak (negative absorbs).
    """

    position_nm: Vector
    phase: float
    width_nm: float
    gain: float = 0.0

    def __post_init__(self) -> None:
        """Validate the column.

        Raises:
            ValidationError: For a non-positive width or non-finite values.
        """
        values = (*self.position_nm, self.phase, self.width_nm, self.gain)
        if len(self.position_nm) != 2 or not all(math.isfinite(float(x)) for x in values):
            raise ValidationError(f"atom values must be finite with a 2-vector position, got {self!r}")
        if self.width_nm <= 0:
            raise ValidationError(f"atom width must be positive, got {self.width_nm}")
        object.__setattr__(self, "position_nm", (float(self.position_nm[0]), float(self.position_nm[1])))


@dataclass(frozen=True)
class SyntheticWaveSpec:
    """Periodic exit wave built from Gaussian columns.

    Attributes:
        atoms (Tuple[Atom, ...]): Columns.
        background (float): Amplitude far from every column.
        period_nm (Optional[float]): Lattice period; None uses the extent of the grid the wave is built on.
    """

    atoms: Tuple[Atom, ...] = ()
    background: float = 1.0
    period_nm: Optional[float] = None

    def __post_init__(self) -> None:
        """Validate amplitude and period.

        Raises:
            ValidationError: If background or period is not positive.
        """
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not (math.isfinite(self.background) and self.background > 0):
            raise ValidationError(f"background amplitude must be positive, got {self.background!r}")
        if self.period_nm is not None and not (math.isfinite(self.period_nm) and self.period_nm > 0):
            raise ValidationError(f"period must be positive, got {self.period_nm!r}")


def perovskite_wave_spec(cell_nm: float = 0.4, width_nm: float = 0.02, cells: int = 1) -> SyntheticWaveSpec:
    """Projected perovskite cell: heavy corner columns, mixed center column, light edge columns.

    With ``cells > 1`` the cell is tiled into a square supercell whose first
    center column is left out, so the wave has no period shorter than the supercell.

    Args:
        cell_nm (float): Cell edge.
        width_nm (float): Column width.
        cells (int): Cells per supercell edge; the period is ``cells * cell_nm``.

    Returns:
        SyntheticWaveSpec: Wave with amplitudes inside (0, 2].

    Raises:
        ValidationError: If cells < 1.
    """
    if isinstance(cells, bool) or not isinstance(cells, int) or cells < 1:
        raise ValidationError(f"cells must be a positive integer, got {cells!r}")
    half = 0.5 * cell_nm
    origin = -0.5 * cells * cell_nm + half
    atoms: List[Atom] = []
    for i in range(cells):
        for k in range(cells):
            r, c = origin + i * cell_nm, origin + k * cell_nm
            atoms.append(Atom((r - half, c - half), 0.8, width_nm, -0.15))
            if cells == 1 or (i, k) != (0, 0):
                atoms.append(Atom((r, c), 0.6, width_nm, 0.15))
            atoms.append(Atom((r - half, c), 0.25, width_nm, 0.05))
            atoms.append(Atom((r, c - half), 0.25, width_nm, 0.05))
    return SyntheticWaveSpec(tuple(atoms), 1.0, cells * cell_nm)


def _bump(spec: GridSpec, atom: Atom, period: float) -> RealArray:
    x_rows, x_cols = spec.coordinates()
    d_rows = x_rows - atom.position_nm[0]
    d_cols = x_cols - atom.position_nm[1]
    d_rows = d_rows - period * np.round(d_rows / period)
    d_cols = d_cols - period * np.round(d_cols / period)
    return np.asarray(np.exp(-0.5 * (d_rows ** 2 + d_cols ** 2) / atom.width_nm ** 2), dtype=np.float64)


def make_synthetic_wave(spec: GridSpec, s: SyntheticWaveSpec, p: Optional[OpticalParams] = None) -> ComplexField:
    """Band-limited synthetic exit wave in Fourier space.

    Args:
        spec (GridSpec): Grid to sample on.
        s (SyntheticWaveSpec): Columns and background.
        p (Optional[OpticalParams]): Constants whose aperture masks the wave (defaults apply when None).

    Returns:
        ComplexField: Aperture-masked Fourier-space wave.
    """
    p = p or OpticalParams()
    period = s.period_nm or spec.extent_nm
    phase = np.zeros((spec.n, spec.n))
    gain = np.zeros((spec.n, spec.n))
    for atom in s.atoms:
        bump = _bump(spec, atom, period)
        phase += atom.phase * bump
        gain += atom.gain * bump
    wave = s.background * (1.0 + gain) * np.exp(1j * phase)
    psi = spectral_transform(ComplexField(spec, wave, Space.REAL))
    return apply_mask(psi, band_mask(spec, p.aperture_radius))


def crop_wave(psi_large: ComplexField, spec: GridSpec, p: OpticalParams) -> ComplexField:
    """Central real-space window of a Fourier-space wave, returned in Fourier space.

    Args:
        psi_large (ComplexField): Wave on the oversized grid.
        spec (GridSpec): Target grid with the same pixel size.
        p (OpticalParams): Constants whose aperture masks the result.

    Returns:
        ComplexField: Aperture-masked wave on ``spec``.
    """
    window = crop_center(inverse_spectral_transform(psi_large), spec.n)
    psi = spectral_transform(ComplexField(spec, window.values, Space.REAL))
    return apply_mask(psi, band_mask(spec, p.aperture_radius))


def simulate_image(psi: ComplexField, kernel: FactorizedKernel) -> ComplexField:
    """Simulated image Ψ ⋆_T Ψ in Fourier space.

    Args:
        psi (ComplexField): Fourier-space exit wave.
        kernel (FactorizedKernel): Factorized TCC of the image's focus.

    Returns:
        ComplexField: Fourier transform of the image.

    Raises:
        ValidationError: If psi is not a Fourier field on the kernel's grid.
    """
    if psi.space is not Space.FOURIER:
        raise ValidationError("simulate_image expects a Fourier-space wave")
    if psi.spec != kernel.spec:
        raise ValidationError(f"wave grid {psi.spec} does not match kernel grid {kernel.spec}")
    mask = kernel.factors.mask
    masked = apply_mask(psi, mask) if mask is not None else psi
    return wcc_factorized(masked, masked, kernel.factors)


@dataclass(frozen=True)
class NoiseModel:
    """Shot noise: the image is scaled to ``dose`` counts per unit intensity and Poisson sampled.

    Attributes:
        dose (float): Expected counts per pixel at unit intensity.
        seed (int): Seed of the random generator.
    """

    dose: float
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the dose.

        Raises:
            ValidationError: If dose is not positive.
        """
        if not (math.isfinite(self.dose) and self.dose > 0):
            raise ValidationError(f"dose must be positive, got {self.dose!r}")

    def apply(self, images: Sequence[RealField]) -> Tuple[RealField, ...]:
        """Sample noisy images.

        Args:
            images (Sequence[RealField]): Noiseless images.

        Returns:
            Tuple[RealField, ...]: Noisy images in intensity units.
        """
        rng = np.random.default_rng(self.seed)
        return tuple(RealField(g.spec, rng.poisson(np.clip(g.values, 0.0, None) * self.dose) / self.dose)
                     for g in images)


def focus_sequence(start_nm: float, step_nm: float, count: int) -> Tuple[float, ...]:
    """Equally spaced foci.

    Args:
        start_nm (float): First focus.
        step_nm (float): Increment.
        count (int): Number of images.

    Returns:
        Tuple[float, ...]: Foci start + j·step.
    """
    return tuple(start_nm + j * step_nm for j in range(count))


def drift_sequence(step_nm: Sequence[float], count: int) -> Tuple[Vector, ...]:
    """Cumulative constant drift, starting at zero.

    Args:
        step_nm (Sequence[float]): Per-image drift (row, column).
        count (int): Number of images.

    Returns:
        Tuple[Vector, ...]: Drift j·step for j = 0..count-1.
    """
    return tuple((j * float(step_nm[0]), j * float(step_nm[1])) for j in range(count))


def simulate_series(psi_large: ComplexField, foci: Sequence[float], drifts: Sequence[Sequence[float]],
                    p: OpticalParams, n_focal: int = 7, noise: Optional[NoiseModel] = None) -> FocusSeries:
    """Simulate a drifting focal series on the doubled grid and crop the central window.

    Image j is the simulated image moved by +d_j, so its ground-truth translation is d_j.

    Args:
        psi_large (ComplexField): Fourier-space wave on the doubled grid.
        foci (Sequence[float]): Defocus per image.
        drifts (Sequence[Sequence[float]]): Cumulative drift per image, the first one (0, 0).
        p (OpticalParams): Microscope constants.
        n_focal (int): Focal nodes of each kernel.
        noise (Optional[NoiseModel]): Optional shot noise.

    Returns:
        FocusSeries: Images on the half-size grid with ground-truth translations.

    Raises:
        ValidationError: On empty input, mismatched lengths, a nonzero first drift or an odd-sized grid.
        NumericalError: If a simulated image is not real to 1e-12 of its maximum.
    """
    if psi_large.space is not Space.FOURIER:
        raise ValidationError("simulate_series expects a Fourier-space wave")
    if not foci:
        raise ValidationError("at least one focus is required")
    if len(foci) != len(drifts):
        raise ValidationError(f"{len(foci)} foci but {len(drifts)} drifts")
    if psi_large.spec.n % 2:
        raise ValidationError("the oversized grid needs an even sample count")
    if any(len(d) != 2 for d in drifts) or tuple(float(c) for c in drifts[0]) != (0.0, 0.0):
        raise ValidationError("drifts must be 2-vectors with the first one (0, 0)")
    n = psi_large.spec.n // 2
    images: List[RealField] = []
    for index, (z, d) in enumerate(zip(foci, drifts)):
        kernel = build_factorized_kernel(psi_large.spec, float(z), p, n_focal)
        moved = modulate(simulate_image(psi_large, kernel), (-float(d[0]), -float(d[1])))
        window = crop_center(inverse_spectral_transform(moved), n)
        try:
            images.append(as_real_field(window, REALNESS_TOLERANCE))
        except ValidationError as e:
            raise NumericalError(f"simulated image {index} (Z={z} nm) failed the realness check: {e}") from e
        logger.debug("simulated image %d at Z=%.4g nm", index, z)
    spec = images[0].spec
    if noise is not None:
        images = list(noise.apply(images))
    translations = tuple((float(d[0]), float(d[1])) for d in drifts)
    return FocusSeries(tuple(images), tuple(float(z) for z in foci), translations, p, spec)


def _params_metadata(p: OpticalParams) -> Metadata:
    return {
        "lambda_nm": p.lambda_nm,
        "cs_nm": p.cs_nm,
        "alpha_max_rad": p.alpha_max_rad,
        "delta_nm": p.delta_nm,
        "alpha_conv_rad": p.alpha_conv_rad,
    }


def save_series(series: FocusSeries, directory: Union[str, Path], extra: Optional[Metadata] = None) -> FieldStore:
    """Write a series as one field file per image plus a manifest.

    Args:
        series (FocusSeries): Series to write.
        directory (Union[str, Path]): Output directory.
        extra (Optional[Metadata]): Additional manifest entries.

    Returns:
        FieldStore: Store holding ``image_000``, ``image_001``, ...
    """
    store = FieldStore(directory, create=True)
    for index, (image, z, t) in enumerate(zip(series.images, series.foci_nm, series.translations_nm)):
        key = f"image_{index:03d}"
        store.extra[key] = {"focus_nm": z, "translation_nm": t}
        store[key] = image
    manifest: Metadata = {
        "count": len(series),
        "n": series.spec.n,
        "extent_nm": series.spec.extent_nm,
        "foci_nm": series.foci_nm,
        "translations_nm": series.translations_nm,
    }
    manifest.update(_params_metadata(series.params))
    manifest.update(extra or {})
    store.write_manifest(manifest)
    logger.info("wrote %d image(s) to %s", len(series), store.directory)
    return store


def load_series(directory: Union[str, Path]) -> FocusSeries:
    """Read a series written by :func:`save_series`.

    Args:
        directory (Union[str, Path]): Series directory.

    Returns:
        FocusSeries: The series.

    Raises:
        StorageError: On a missing or inconsistent manifest, missing images or foreign fields.
    """
    store = FieldStore(directory)
    if not store.directory.is_dir():
        raise StorageError(f"series directory {store.directory} does not exist")
    manifest = store.read_manifest()
    source = store.manifest_path()
    count = require(manifest, "count", int, source)
    foci = require(manifest, "foci_nm", tuple, source)
    translations = require(manifest, "translations_nm", tuple, source)
    if count < 1 or len(foci) != count or len(translations) != count:
        raise StorageError(f"{source}: count {count} does not match foci/translations")
    try:
        keys = _params_metadata(OpticalParams())
        params = OpticalParams(**{key: require(manifest, key, float, source) for key in keys})
        spec = GridSpec(require(manifest, "n", int, source), require(manifest, "extent_nm", float, source))
    except ValidationError as e:
        raise StorageError(f"{source}: {e}") from e
    images: List[RealField] = []
    for index in range(count):
        key = f"image_{index:03d}"
        try:
            image = store[key]
        except KeyError as e:
            raise StorageError(f"{store.directory}: missing {key}") from e
        if not isinstance(image, RealField) or image.spec != spec:
            raise StorageError(f"{store.directory}: {key} is not a real field on {spec}")
        meta = store.metadata(key)
        if meta.get("focus_nm") != foci[index]:
            raise StorageError(f"{store.directory}: {key} focus disagrees with the manifest")
        images.append(image)
    try:
        series = FocusSeries(tuple(images), foci, translations, params, spec)
    except ValidationError as e:
        raise StorageError(f"{store.directory}: {e}") from e
    logger.info("read %d image(s) from %s", count, store.directory)
    return series

