"""Regularized misfit of a focal series, its gradients and its quartic line restriction.

For image j with kernel factors t_k, the model spectrum is
``S_j = F(Σ_k |F⁻¹(Ψ t_k)|²)`` and the residual is ``R_j = S_j − μ_{t_j} G_j``,
where ``G_j`` is the image spectrum low-passed to the 2A band. The energy is
``(1/N) Σ_j ‖R_j‖² + α ‖Ψ − Ψ_M‖²`` with Fourier-space norms.
"""
import logging
import math

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .fields import (ComplexArray, ComplexField, GridSpec, RealArray, Space, Vector, band_mask, forward_array,
                     inverse_array)
from .forward import FocusSeries
from .tcc import FactorizedKernel

logger = logging.getLogger(__name__)

Coefficients = Tuple[float, float, float, float, float]

FOCUS_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class ReconstructionVariables:
    """Unknowns of the reconstruction.

    Attributes:
        psi (ComplexField): Fourier-space exit wave.
        translations_nm (Tuple[Vector, ...]): Translation per image; the solver pins the first to (0, 0).
    """

    psi: ComplexField
    translations_nm: Tuple[Vector, ...]

    def __post_init__(self) -> None:
        """Validate space and translations.

        Raises:
            ValidationError: If psi is not in Fourier space or a translation is not a finite 2-vector.
        """
        if self.psi.space is not Space.FOURIER:
            raise ValidationError("the exit wave must be a Fourier-space field")
        translations = tuple(tuple(float(c) for c in t) for t in self.translations_nm)
        if any(len(t) != 2 or not all(math.isfinite(c) for c in t) for t in translations):
            raise ValidationError("translations must be finite 2-vectors")
        object.__setattr__(self, "translations_nm", translations)

    def translation_array(self) -> RealArray:
        """Translations as an (N, 2) array.

        Returns:
            RealArray: Copy of the translations.
        """
        return np.array(self.translations_nm, dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy split into its parts.

    Attributes:
        total (float): data_term + regularizer.
        data_term (float): Mean squared residual norm.
        regularizer (float): α‖Ψ − Ψ_M‖².
        residuals (Tuple[float, ...]): Squared residual norm per image.
    """

    total: float
    data_term: float
    regularizer: float
    residuals: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class RegularizerSpec:
    """Tikhonov term α‖Ψ − Ψ_M‖².

    Attributes:
        alpha (float): Weight α ≥ 0.
        psi_m (Optional[ComplexField]): Prior wave in Fourier space; None means zero.
    """

    alpha: float = 0.0
    psi_m: Optional[ComplexField] = None

    def __post_init__(self) -> None:
        """Validate the weight and prior.

        Raises:
            ValidationError: If alpha is negative or non-finite, or the prior is not in Fourier space.
        """
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValidationError(f"alpha must be finite and nonnegative, got {self.alpha!r}")
        if self.psi_m is not None and self.psi_m.space is not Space.FOURIER:
            raise ValidationError("the prior wave must be a Fourier-space field")


@dataclass(frozen=True)
class Evaluation:
    """Energy and both gradients at one point.

    Attributes:
        energy (EnergyBreakdown): Energy parts.
        grad_wave (ComplexArray): Wave gradient samples (Fourier space, aperture-masked).
        grad_translation (RealArray): Translation gradients, shape (N, 2), in 1/nm energy units.
    """

    energy: EnergyBreakdown
    grad_wave: ComplexArray
    grad_translation: RealArray


class Objective:
    """Prepared evaluator for one series and its kernels.

    The image spectra are low-passed to the 2A band once, here.

    Attributes:
        series (FocusSeries): Data.
        kernels (Tuple[FactorizedKernel, ...]): One kernel per image.
        reg (RegularizerSpec): Tikhonov term.
        spec (GridSpec): Shared grid.
        data (Tuple[ComplexArray, ...]): Prefiltered image spectra G_j.
    """

    def __init__(self, series: FocusSeries, kernels: Sequence[FactorizedKernel],
                 reg: Optional[RegularizerSpec] = None) -> None:
        """
        Check kernels against the series and prefilter the data.

        Args:
            series (FocusSeries): Data.
            kernels (Sequence[FactorizedKernel]): One kernel per image, same foci and grid.
            reg (Optional[RegularizerSpec]): Tikhonov term (α = 0 when None).

        Raises:
            ValidationError: On a count, focus or grid mismatch.
        """
        self.series = series
        self.kernels = tuple(kernels)
        self.reg = reg or RegularizerSpec()
        self.spec: GridSpec = series.spec
        if not self.kernels:
            raise ValidationError("at least one kernel is required")
        if len(self.kernels) != len(series):
            raise ValidationError(f"{len(self.kernels)} kernels for {len(series)} images")
        for index, (kernel, z) in enumerate(zip(self.kernels, series.foci_nm)):
            if kernel.spec != self.spec:
                raise ValidationError(f"kernel {index} is on {kernel.spec}, series on {self.spec}")
            if not math.isclose(kernel.focus_nm, z, rel_tol=FOCUS_TOLERANCE, abs_tol=FOCUS_TOLERANCE):
                raise ValidationError(f"kernel {index} has focus {kernel.focus_nm} nm, image has {z} nm")
        if self.reg.psi_m is not None and self.reg.psi_m.spec != self.spec:
            raise ValidationError("prior wave grid does not match the series")
        self._factors = tuple(k.factors.stack() for k in self.kernels)
        band = band_mask(self.spec, 2.0 * series.params.aperture_radius).values
        self.data = tuple(forward_array(g.values, self.spec) * band for g in series.images)
        v_rows, v_cols = self.spec.frequencies()
        self._ramps = (2j * np.pi * v_rows, 2j * np.pi * v_cols)
        self._mask = band_mask(self.spec, series.params.aperture_radius).values
        self._cell = self.spec.cell_area(Space.FOURIER)
        self._prior = (self.reg.psi_m.values if self.reg.psi_m is not None
                       else np.zeros((self.spec.n, self.spec.n), dtype=np.complex128))

    @property
    def count(self) -> int:
        """Number of images N."""
        return len(self.kernels)

    @property
    def mask(self) -> RealArray:
        """Aperture indicator on the frequency lattice."""
        return self._mask

    def _norm2(self, values: ComplexArray) -> float:
        return float(np.vdot(values, values).real * self._cell)

    def _inner(self, f: ComplexArray, g: ComplexArray) -> complex:
        return complex(np.vdot(f, g) * self._cell)

    def _modulated_data(self, index: int, t: Sequence[float]) -> ComplexArray:
        v_rows, v_cols = self._ramps
        return np.asarray(self.data[index] * np.exp(v_rows * t[0] + v_cols * t[1]), dtype=np.complex128)

    def _waves(self, index: int, psi: ComplexArray) -> ComplexArray:
        return inverse_array(psi[None, :, :] * self._factors[index], self.spec)

    def _intensity(self, a: ComplexArray) -> ComplexArray:
        return forward_array(np.sum(np.abs(a) ** 2, axis=0), self.spec)

    def _regularizer(self, psi: ComplexArray) -> float:
        if self.reg.alpha == 0.0:
            return 0.0
        return self.reg.alpha * self._norm2(psi - self._prior)

    def evaluate_arrays(self, psi: ComplexArray, translations: RealArray,
                        need_gradients: bool = True) -> Evaluation:
        """Energy and gradients from raw arrays, the solver's inner loop.

        Args:
            psi (ComplexArray): Fourier-space wave samples.
            translations (RealArray): Translations, shape (N, 2), in nm.
            need_gradients (bool): Skip the gradient work when False (zeros are returned).

        Returns:
            Evaluation: Energy parts and gradients.
        """
        n_images = self.count
        residuals: List[float] = []
        grad_wave = np.zeros_like(psi)
        grad_t = np.zeros((n_images, 2))
        for j in range(n_images):
            a = self._waves(j, psi)
            model = self._intensity(a)
            g = self._modulated_data(j, translations[j])
            r = model - g
            residuals.append(self._norm2(r))
            if not need_gradients:
                continue
            r_real = inverse_array(r, self.spec).real
            back = forward_array(r_real[None, :, :] * a, self.spec)
            grad_wave += 4.0 * np.sum(np.conj(self._factors[j]) * back, axis=0)
            for c, ramp in enumerate(self._ramps):
                grad_t[j, c] = -2.0 * self._inner(r, ramp * g).real
        data_term = math.fsum(residuals) / n_images
        regularizer = self._regularizer(psi)
        grad_wave /= n_images
        grad_t /= n_images
        if need_gradients and self.reg.alpha > 0.0:
            grad_wave += 2.0 * self.reg.alpha * (psi - self._prior) * self._mask
        breakdown = EnergyBreakdown(data_term + regularizer, data_term, regularizer, tuple(residuals))
        return Evaluation(breakdown, grad_wave, grad_t)

    def _check(self, variables: ReconstructionVariables) -> None:
        if variables.psi.spec != self.spec:
            raise ValidationError(f"wave grid {variables.psi.spec} does not match series grid {self.spec}")
        if len(variables.translations_nm) != self.count:
            raise ValidationError(f"{len(variables.translations_nm)} translations for {self.count} images")

    def evaluate(self, variables: ReconstructionVariables) -> Evaluation:
        """Energy and both gradients in one pass.

        Args:
            variables (ReconstructionVariables): Point of evaluation.

        Returns:
            Evaluation: Energy parts and gradients.
        """
        self._check(variables)
        return self.evaluate_arrays(variables.psi.values, variables.translation_array())

    def energy(self, variables: ReconstructionVariables) -> EnergyBreakdown:
        """Energy at a point.

        Args:
            variables (ReconstructionVariables): Point of evaluation.

        Returns:
            EnergyBreakdown: Energy parts.
        """
        self._check(variables)
        return self.evaluate_arrays(variables.psi.values, variables.translation_array(), False).energy

    def gradient_wave(self, variables: ReconstructionVariables) -> ComplexField:
        """Riesz representer of the wave derivative under Re⟨·,·⟩.

        Args:
            variables (ReconstructionVariables): Point of evaluation.

        Returns:
            ComplexField: Aperture-masked Fourier-space gradient.
        """
        return ComplexField(self.spec, self.evaluate(variables).grad_wave, Space.FOURIER)

    def gradient_translation(self, variables: ReconstructionVariables) -> Tuple[Vector, ...]:
        """Energy gradient with respect to each translation.

        Args:
            variables (ReconstructionVariables): Point of evaluation.

        Returns:
            Tuple[Vector, ...]: (row, column) gradient per image, the first one included.
        """
        grad = self.evaluate(variables).grad_translation
        return tuple((float(g[0]), float(g[1])) for g in grad)

    def line_coefficients(self, psi: ComplexField, phi: ComplexField,
                          translations_nm: Sequence[Sequence[float]]) -> Coefficients:
        """Coefficients C⁰..C⁴ of s ↦ energy(psi + s·phi, t).

        Args:
            psi (ComplexField): Base wave.
            phi (ComplexField): Direction.
            translations_nm (Sequence[Sequence[float]]): Translations, fixed along the line.

        Returns:
            Coefficients: C⁰..C⁴ including the regularizer's quadratic part.

        Raises:
            ValidationError: If phi is zero or the inputs are on the wrong grid.
        """
        self._check(ReconstructionVariables(psi, tuple((t[0], t[1]) for t in translations_nm)))
        if phi.spec != self.spec or phi.space is not Space.FOURIER:
            raise ValidationError("direction must be a Fourier-space field on the series grid")
        if not np.any(phi.values):
            raise ValidationError("direction must be nonzero")
        return self.line_coefficients_arrays(psi.values, phi.values, np.asarray(translations_nm, dtype=np.float64))

    def line_coefficients_arrays(self, psi: ComplexArray, phi: ComplexArray, translations: RealArray) -> Coefficients:
        """Array form of :meth:`line_coefficients`.

        Args:
            psi (ComplexArray): Base wave samples.
            phi (ComplexArray): Direction samples.
            translations (RealArray): Translations, shape (N, 2).

        Returns:
            Coefficients: C⁰..C⁴.
        """
        c = np.zeros(5)
        for j in range(self.count):
            a = self._waves(j, psi)
            b = self._waves(j, phi)
            base = self._intensity(a) - self._modulated_data(j, translations[j])
            lin = forward_array(np.sum(2.0 * (np.conj(a) * b).real, axis=0), self.spec)
            quad = self._intensity(b)
            c += (self._norm2(base),
                  2.0 * self._inner(base, lin).real,
                  self._norm2(lin) + 2.0 * self._inner(base, quad).real,
                  2.0 * self._inner(lin, quad).real,
                  self._norm2(quad))
        c /= self.count
        if self.reg.alpha > 0.0:
            d = psi - self._prior
            c[0] += self.reg.alpha * self._norm2(d)
            c[1] += 2.0 * self.reg.alpha * self._inner(d, phi).real
            c[2] += self.reg.alpha * self._norm2(phi)
        return (float(c[0]), float(c[1]), float(c[2]), float(c[3]), float(c[4]))

    def delta_direction(self, width: float) -> ComplexArray:
        """Gaussian bump at zero frequency with unit integral, masked to the aperture.

        Args:
            width (float): Standard deviation in nm^-1.

        Returns:
            ComplexArray: Direction samples approximating δ₀.

        Raises:
            ValidationError: If width is not positive.
        """
        if not (math.isfinite(width) and width > 0):
            raise ValidationError(f"probe width must be positive, got {width!r}")
        v_rows, v_cols = self.spec.frequencies()
        bump = np.exp(-0.5 * (v_rows ** 2 + v_cols ** 2) / width ** 2)
        bump /= np.sum(bump) * self._cell
        return np.asarray(bump * self._mask, dtype=np.complex128)

    def convexity_probe(self, width: float) -> float:
        """Second line coefficient at Ψ = 0 along a mollified delta, without the regularizer.

        Args:
            width (float): Bump width in nm^-1.

        Returns:
            float: C²; 0 for an all-zero series.
        """
        phi = self.delta_direction(width)
        total = 0.0
        for j in range(self.count):
            quad = self._intensity(self._waves(j, phi))
            g = self._modulated_data(j, self.series.translations_nm[j])
            total += -2.0 * self._inner(g, quad).real
        return total / self.count

    def l1_limit(self) -> float:
        """Limit of the convexity probe as the width shrinks, -(2/N)Σ‖g_j‖_L¹.

        Returns:
            float: The limit.
        """
        h2 = self.spec.cell_area(Space.REAL)
        return -2.0 / self.count * math.fsum(float(np.sum(np.abs(g.values))) * h2 for g in self.series.images)


def energy(variables: ReconstructionVariables, series: FocusSeries, kernels: Sequence[FactorizedKernel],
           reg: Optional[RegularizerSpec] = None) -> EnergyBreakdown:
    """Regularized energy of a reconstruction.

    Args:
        variables (ReconstructionVariables): Wave and translations.
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): Kernel per image.
        reg (Optional[RegularizerSpec]): Tikhonov term.

    Returns:
        EnergyBreakdown: Energy parts.
    """
    return Objective(series, kernels, reg).energy(variables)


def gradient_wave(variables: ReconstructionVariables, series: FocusSeries, kernels: Sequence[FactorizedKernel],
                  reg: Optional[RegularizerSpec] = None) -> ComplexField:
    """Wave gradient of the energy.

    Args:
        variables (ReconstructionVariables): Wave and translations.
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): Kernel per image.
        reg (Optional[RegularizerSpec]): Tikhonov term.

    Returns:
        ComplexField: Aperture-masked Fourier-space gradient.
    """
    return Objective(series, kernels, reg).gradient_wave(variables)


def gradient_translation(variables: ReconstructionVariables, series: FocusSeries,
                         kernels: Sequence[FactorizedKernel]) -> Tuple[Vector, ...]:
    """Translation gradients of the energy.

    Args:
        variables (ReconstructionVariables): Wave and translations.
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): Kernel per image.

    Returns:
        Tuple[Vector, ...]: Gradient per image.
    """
    return Objective(series, kernels).gradient_translation(variables)


def line_coefficients(psi: ComplexField, phi: ComplexField, translations_nm: Sequence[Sequence[float]],
                      series: FocusSeries, kernels: Sequence[FactorizedKernel],
                      reg: Optional[RegularizerSpec] = None) -> Coefficients:
    """Quartic coefficients of the energy along psi + s·phi.

    Args:
        psi (ComplexField): Base wave.
        phi (ComplexField): Nonzero direction.
        translations_nm (Sequence[Sequence[float]]): Fixed translations.
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): Kernel per image.
        reg (Optional[RegularizerSpec]): Tikhonov term.

    Returns:
        Coefficients: C⁰..C⁴.
    """
    return Objective(series, kernels, reg).line_coefficients(psi, phi, translations_nm)


def convexity_probe(series: FocusSeries, kernels: Sequence[FactorizedKernel], width: float) -> float:
    """C² at Ψ = 0 along a narrow Gaussian direction.

    Args:
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): Kernel per image.
        width (float): Bump width in nm^-1.

    Returns:
        float: C², negative for any nonzero series.
    """
    return Objective(series, kernels).convexity_probe(width)


def polynomial_value(coefficients: Sequence[float], step: float) -> float:
    """Evaluate Σ C^k s^k.

    Args:
        coefficients (Sequence[float]): C⁰..C⁴.
        step (float): s.

    Returns:
        float: Polynomial value.
    """
    return float(np.polynomial.polynomial.polyval(step, coefficients))
