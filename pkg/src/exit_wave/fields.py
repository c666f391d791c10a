"""Sampled fields on a centered, periodic lattice with physical units.

Both spaces use the same storage order: lattice index ``k`` in
``{-n/2, ..., n/2 - 1}`` lives at array position ``k + n/2`` along each axis.
Real-space samples sit at ``x_k = k * pixel_size`` and frequency samples at
``v_k = k / extent_nm``. Two-vectors are ordered like the array axes, (row, column).
"""
import enum
import logging
import math

from dataclasses import dataclass
from typing import Any, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from scipy import fft as sp_fft

from .errors import ValidationError

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]
Vector = Tuple[float, float]

_AXES = (-2, -1)


class Space(str, enum.Enum):
    """Which domain a field's samples live in."""

    REAL = "real"
    FOURIER = "fourier"

    def dual(self) -> "Space":
        """Return the other space.

        Returns:
            Space: FOURIER for REAL and vice versa.
        """
        return Space.FOURIER if self is Space.REAL else Space.REAL


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid with physical side length.

    Attributes:
        n (int): Samples per side.
        extent_nm (float): Physical side length L in nm.
    """

    n: int
    extent_nm: float

    def __post_init__(self) -> None:
        """Validate the sampling.

        Raises:
            ValidationError: If n is not a positive integer or the extent is not a positive finite number.
        """
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n <= 0:
            raise ValidationError(f"grid size must be a positive integer, got {self.n!r}")
        if not math.isfinite(self.extent_nm) or self.extent_nm <= 0:
            raise ValidationError(f"grid extent must be positive and finite, got {self.extent_nm!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "extent_nm", float(self.extent_nm))

    @property
    def pixel_size(self) -> float:
        """Real-space sample spacing h = L / n in nm."""
        return self.extent_nm / self.n

    @property
    def frequency_spacing(self) -> float:
        """Frequency sample spacing 1 / L in nm^-1."""
        return 1.0 / self.extent_nm

    @property
    def nyquist(self) -> float:
        """Largest representable frequency magnitude along one axis."""
        return (self.n // 2) * self.frequency_spacing

    def cell_area(self, space: Space) -> float:
        """Quadrature weight of one lattice cell.

        Args:
            space (Space): The space whose cell is measured.

        Returns:
            float: pixel_size² in real space, frequency_spacing² in Fourier space.
        """
        step = self.pixel_size if space is Space.REAL else self.frequency_spacing
        return step * step

    def doubled(self) -> "GridSpec":
        """Grid with twice the samples over twice the extent (same pixel size).

        Returns:
            GridSpec: The oversized grid used for wrap-around control.
        """
        return GridSpec(2 * self.n, 2.0 * self.extent_nm)

    def axis(self, space: Space) -> RealArray:
        """Centered 1-D sample positions along one axis.

        Args:
            space (Space): REAL gives nm positions, FOURIER gives nm^-1 frequencies.

        Returns:
            RealArray: Length-n array of coordinates.
        """
        step = self.pixel_size if space is Space.REAL else self.frequency_spacing
        return (np.arange(self.n, dtype=np.float64) - self.n // 2) * step

    def mesh(self, space: Space) -> Tuple[RealArray, RealArray]:
        """Centered 2-D coordinate arrays (row, column).

        Args:
            space (Space): Space whose lattice is returned.

        Returns:
            Tuple[RealArray, RealArray]: Row and column coordinate arrays of shape (n, n).
        """
        ax = self.axis(space)
        rows, cols = np.meshgrid(ax, ax, indexing="ij")
        return rows, cols

    def frequencies(self) -> Tuple[RealArray, RealArray]:
        """Frequency lattice v_k = k / L as (row, column) arrays.

        Returns:
            Tuple[RealArray, RealArray]: Frequency arrays in nm^-1.
        """
        return self.mesh(Space.FOURIER)

    def coordinates(self) -> Tuple[RealArray, RealArray]:
        """Real-space lattice x_k = k * h as (row, column) arrays.

        Returns:
            Tuple[RealArray, RealArray]: Coordinate arrays in nm.
        """
        return self.mesh(Space.REAL)

    @property
    def center(self) -> int:
        """Array position of lattice index 0."""
        return self.n // 2


def _require_finite(values: npt.NDArray[Any], what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise ValidationError(f"{what} holds {bad} non-finite sample(s)")


def _frozen_array(values: Any, dtype: Any, spec: GridSpec, what: str) -> npt.NDArray[Any]:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.shape != (spec.n, spec.n):
        raise ValidationError(f"{what} has shape {arr.shape}, grid expects {(spec.n, spec.n)}")
    _require_finite(arr, what)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Immutable complex samples on a grid, tagged with their space.

    Attributes:
        spec (GridSpec): Sampling of the field.
        values (ComplexArray): n x n samples in centered storage order (read-only copy).
        space (Space): Domain of the samples.
    """

    spec: GridSpec
    values: ComplexArray
    space: Space

    def __post_init__(self) -> None:
        """Copy, validate and freeze the samples."""
        object.__setattr__(self, "values", _frozen_array(self.values, np.complex128, self.spec, "complex field"))
        object.__setattr__(self, "space", Space(self.space))

    @classmethod
    def zeros(cls, spec: GridSpec, space: Space) -> "ComplexField":
        """Create the zero field.

        Args:
            spec (GridSpec): Sampling.
            space (Space): Domain.

        Returns:
            ComplexField: All-zero field.
        """
        return cls(spec, np.zeros((spec.n, spec.n), dtype=np.complex128), space)

    @classmethod
    def plane_wave(cls, spec: GridSpec, amplitude: complex = 1.0) -> "ComplexField":
        """Fourier-space field of a constant real-space wave.

        Args:
            spec (GridSpec): Sampling.
            amplitude (complex): Real-space value of the wave.

        Returns:
            ComplexField: Impulse of height amplitude·L² at zero frequency.
        """
        values = np.zeros((spec.n, spec.n), dtype=np.complex128)
        values[spec.center, spec.center] = amplitude * spec.extent_nm ** 2
        return cls(spec, values, Space.FOURIER)

    def with_values(self, values: Any) -> "ComplexField":
        """Return a field on the same grid and space holding new samples.

        Args:
            values (Any): Replacement samples.

        Returns:
            ComplexField: New field.
        """
        return ComplexField(self.spec, values, self.space)


@dataclass(frozen=True, eq=False)
class RealField:
    """Immutable real samples on a grid.

    Attributes:
        spec (GridSpec): Sampling of the field.
        values (RealArray): n x n real samples (read-only copy).
        space (Space): Domain of the samples; images are REAL, masks are FOURIER.
    """

    spec: GridSpec
    values: RealArray
    space: Space = Space.REAL

    def __post_init__(self) -> None:
        """Copy, validate and freeze the samples."""
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64, self.spec, "real field"))
        object.__setattr__(self, "space", Space(self.space))

    def to_complex(self) -> ComplexField:
        """Promote to a complex field in the same space.

        Returns:
            ComplexField: Same samples with zero imaginary part.
        """
        return ComplexField(self.spec, self.values.astype(np.complex128), self.space)


def forward_array(values: npt.NDArray[Any], spec: GridSpec) -> ComplexArray:
    """Physically scaled forward DFT of a centered real-space array.

    Args:
        values (npt.NDArray[Any]): Centered real-space samples.
        spec (GridSpec): Sampling.

    Returns:
        ComplexArray: Centered Fourier samples, h² Σ f(x) e^{-2πi v·x}.
    """
    spectrum = sp_fft.fftshift(sp_fft.fft2(sp_fft.ifftshift(values, axes=_AXES)), axes=_AXES)
    return np.asarray(spectrum * spec.cell_area(Space.REAL), dtype=np.complex128)


def inverse_array(values: npt.NDArray[Any], spec: GridSpec) -> ComplexArray:
    """Physically scaled inverse DFT of a centered Fourier-space array.

    Args:
        values (npt.NDArray[Any]): Centered Fourier samples.
        spec (GridSpec): Sampling.

    Returns:
        ComplexArray: Centered real-space samples, Δv² Σ F(v) e^{2πi v·x}.
    """
    samples = sp_fft.fftshift(sp_fft.ifft2(sp_fft.ifftshift(values, axes=_AXES)), axes=_AXES)
    return np.asarray(samples * (spec.cell_area(Space.FOURIER) * spec.n * spec.n), dtype=np.complex128)


def to_dual_array(values: npt.NDArray[Any], spec: GridSpec, space: Space) -> ComplexArray:
    """Transform an array living in ``space`` into the other space.

    Args:
        values (npt.NDArray[Any]): Centered samples.
        spec (GridSpec): Sampling.
        space (Space): Current space of the samples.

    Returns:
        ComplexArray: Samples in the dual space.
    """
    if space is Space.REAL:
        return forward_array(values, spec)
    return inverse_array(values, spec)


def spectral_transform(f: ComplexField) -> ComplexField:
    """Forward transform, real space to Fourier space.

    Args:
        f (ComplexField): Real-space field.

    Returns:
        ComplexField: Fourier-space field.

    Raises:
        ValidationError: If f is not a real-space field.
    """
    if f.space is not Space.REAL:
        raise ValidationError("spectral_transform expects a real-space field")
    return ComplexField(f.spec, forward_array(f.values, f.spec), Space.FOURIER)


def inverse_spectral_transform(f: ComplexField) -> ComplexField:
    """Inverse transform, Fourier space to real space.

    Args:
        f (ComplexField): Fourier-space field.

    Returns:
        ComplexField: Real-space field.

    Raises:
        ValidationError: If f is not a Fourier-space field.
    """
    if f.space is not Space.FOURIER:
        raise ValidationError("inverse_spectral_transform expects a Fourier-space field")
    return ComplexField(f.spec, inverse_array(f.values, f.spec), Space.REAL)


def modulation_phase(spec: GridSpec, shift: Sequence[float]) -> ComplexArray:
    """Samples of μ_s(v) = exp(2πi v·s) on the frequency lattice.

    Args:
        spec (GridSpec): Sampling.
        shift (Sequence[float]): Shift s in nm, (row, column).

    Returns:
        ComplexArray: Unit-modulus modulation factors.
    """
    v_rows, v_cols = spec.frequencies()
    return np.asarray(np.exp(2j * np.pi * (v_rows * float(shift[0]) + v_cols * float(shift[1]))),
                      dtype=np.complex128)


def modulate(f: ComplexField, shift: Sequence[float]) -> ComplexField:
    """Multiply a Fourier field by e^{2πi v·shift}; translates real space by -shift.

    ``inverse(modulate(F g, s))(x) = g(x + s)``.

    Args:
        f (ComplexField): Fourier-space field.
        shift (Sequence[float]): Shift in nm, (row, column).

    Returns:
        ComplexField: Modulated field.

    Raises:
        ValidationError: If f is not in Fourier space or the shift is not a finite 2-vector.
    """
    if f.space is not Space.FOURIER:
        raise ValidationError("modulate expects a Fourier-space field")
    if len(shift) != 2 or not all(math.isfinite(float(s)) for s in shift):
        raise ValidationError(f"shift must be a finite 2-vector, got {shift!r}")
    return f.with_values(f.values * modulation_phase(f.spec, shift))


def _check_pair(f: Any, g: Any) -> None:
    if f.spec != g.spec:
        raise ValidationError(f"grid mismatch: {f.spec} vs {g.spec}")
    if f.space is not g.space:
        raise ValidationError(f"space mismatch: {f.space.value} vs {g.space.value}")


def inner_product(f: ComplexField, g: ComplexField) -> complex:
    """Discrete L² pairing, conjugate-linear in the first argument.

    Args:
        f (ComplexField): First field (conjugated).
        g (ComplexField): Second field.

    Returns:
        complex: Σ conj(f)·g times the cell area of the fields' space.
    """
    _check_pair(f, g)
    return complex(np.vdot(f.values, g.values) * f.spec.cell_area(f.space))


def l2_norm(f: ComplexField) -> float:
    """Discrete L² norm.

    Args:
        f (ComplexField): Field.

    Returns:
        float: sqrt(<f, f>).
    """
    return math.sqrt(max(inner_product(f, f).real, 0.0))


def band_mask(spec: GridSpec, radius: float) -> RealField:
    """Indicator of the open disc |v| < radius on the frequency lattice.

    Args:
        spec (GridSpec): Sampling.
        radius (float): Disc radius in nm^-1.

    Returns:
        RealField: 0/1 Fourier-space mask.

    Raises:
        ValidationError: If radius is not positive.
    """
    if not radius > 0:
        raise ValidationError(f"mask radius must be positive, got {radius!r}")
    if radius > spec.nyquist:
        logger.warning("mask radius %.6g nm^-1 exceeds Nyquist %.6g nm^-1; the mask saturates",
                       radius, spec.nyquist)
    v_rows, v_cols = spec.frequencies()
    inside = np.hypot(v_rows, v_cols) < radius
    return RealField(spec, inside.astype(np.float64), Space.FOURIER)


def apply_mask(f: ComplexField, mask: RealField) -> ComplexField:
    """Multiply a field by a mask on the same lattice.

    Args:
        f (ComplexField): Field.
        mask (RealField): Mask in the same space.

    Returns:
        ComplexField: Masked field.
    """
    _check_pair(f, mask)
    return f.with_values(f.values * mask.values)


def reflect(values: npt.NDArray[Any]) -> npt.NDArray[Any]:
    """Samples at the negated lattice index, a(-k), in centered storage.

    Args:
        values (npt.NDArray[Any]): Centered n x n samples.

    Returns:
        npt.NDArray[Any]: Array whose entry at index k is the input at -k (periodically).
    """
    return np.roll(np.flip(values, axis=(0, 1)), 1, axis=(0, 1))


def friedel_deviation(f: ComplexField) -> float:
    """Largest violation of G(v) = conj(G(-v)), relative to max |G|.

    Args:
        f (ComplexField): Fourier-space field.

    Returns:
        float: max |G - conj(G(-·))| / max |G| (0 for the zero field).
    """
    peak = float(np.max(np.abs(f.values)))
    if peak == 0.0:
        return 0.0
    return float(np.max(np.abs(f.values - np.conj(reflect(f.values))))) / peak


def crop_center(f: ComplexField, n: int) -> ComplexField:
    """Keep the centered n x n window of a real-space field.

    Args:
        f (ComplexField): Real-space field on a grid of at least n samples.
        n (int): Samples per side of the window.

    Returns:
        ComplexField: Cropped field with the same pixel size.

    Raises:
        ValidationError: If f is not real-space or smaller than the window.
    """
    if f.space is not Space.REAL:
        raise ValidationError("crop_center expects a real-space field")
    if n > f.spec.n:
        raise ValidationError(f"cannot crop {n} samples from a {f.spec.n}-sample grid")
    start = f.spec.center - n // 2
    spec = GridSpec(n, n * f.spec.pixel_size)
    return ComplexField(spec, f.values[start:start + n, start:start + n], Space.REAL)


def as_real_field(f: ComplexField, tolerance: float = 1e-12) -> RealField:
    """Drop the imaginary part of a real-space field after checking it is negligible.

    Args:
        f (ComplexField): Real-space field.
        tolerance (float): Allowed max |imag| relative to max |real|.

    Returns:
        RealField: Real part.

    Raises:
        ValidationError: If the imaginary residue exceeds the tolerance.
    """
    peak = float(np.max(np.abs(f.values.real))) if f.values.size else 0.0
    residue = float(np.max(np.abs(f.values.imag))) if f.values.size else 0.0
    if residue > tolerance * max(peak, np.finfo(np.float64).tiny):
        raise ValidationError(f"imaginary residue {residue:.3e} exceeds {tolerance:.1e} of max {peak:.3e}")
    return RealField(f.spec, f.values.real, f.space)
