"""Joint reconstruction of exit wave and translations.

Fletcher–Reeves nonlinear conjugate gradients with Armijo backtracking over the
packed variable ``(Ψ, t / scale)``, with the first translation pinned to zero and
all translations projected onto a ball.
"""
import csv
import enum
import logging
import math

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from scipy import optimize

from .errors import NumericalError, StorageError, ValidationError
from .fields import (ComplexArray, ComplexField, RealArray, Space, Vector, inverse_array, inverse_spectral_transform,
                     l2_norm, modulate)
from .forward import FocusSeries
from .objective import EnergyBreakdown, Evaluation, Objective, ReconstructionVariables, RegularizerSpec
from .tcc import FactorizedKernel
from .wcc import xcorr_arrays

logger = logging.getLogger(__name__)

LOG_COLUMNS = (
    "iteration", "total_energy", "data_term", "regularizer", "step", "grad_norm_wave", "grad_norm_trans",
    "trans_err_sup_px", "trans_err_euc_px", "wave_err_sup", "wave_err_euc",
)


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    Attributes:
        alpha (float): Regularization weight.
        epsilon_stop (float): Stop when an accepted step lowers the energy by less than this.
        max_iters (int): Iteration cap.
        armijo_sigma (float): Sufficient-decrease fraction.
        armijo_backtrack (float): Step reduction per backtrack.
        armijo_initial_step (float): First trial step; later searches start from the last accepted step.
        armijo_max_backtracks (int): Backtracks before a search counts as failed.
        restart_period (int): Reset to steepest descent every this many iterations.
        translation_bound_nm (Optional[float]): Radius r of the admissible translations (None is half the field of view).
        translation_scale_nm (float): Translation unit of the packed vector; 0 balances it automatically.
        freeze_translations (bool): Keep translations at their initial values.
        freeze_wave (bool): Keep the wave at its initial value.
        exact_line_search (bool): Minimize the quartic line restriction exactly when translations do not move.
    """

    alpha: float = 1e-5
    epsilon_stop: float = 1e-10
    max_iters: int = 1000
    armijo_sigma: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_initial_step: float = 1.0
    armijo_max_backtracks: int = 60
    restart_period: int = 50
    translation_bound_nm: Optional[float] = None
    translation_scale_nm: float = 0.0
    freeze_translations: bool = False
    freeze_wave: bool = False
    exact_line_search: bool = False

    def __post_init__(self) -> None:
        """Validate the settings.

        Raises:
            ValidationError: If any setting is out of range.
        """
        checks = [
            (math.isfinite(self.alpha) and self.alpha >= 0, "alpha must be >= 0"),
            (math.isfinite(self.epsilon_stop) and self.epsilon_stop > 0, "epsilon_stop must be > 0"),
            (self.max_iters >= 0, "max_iters must be >= 0"),
            (0 < self.armijo_sigma < 1, "armijo_sigma must lie in (0, 1)"),
            (0 < self.armijo_backtrack < 1, "armijo_backtrack must lie in (0, 1)"),
            (math.isfinite(self.armijo_initial_step) and self.armijo_initial_step > 0,
             "armijo_initial_step must be > 0"),
            (self.armijo_max_backtracks >= 1, "armijo_max_backtracks must be >= 1"),
            (self.restart_period >= 1, "restart_period must be >= 1"),
            (self.translation_bound_nm is None or self.translation_bound_nm > 0, "translation_bound_nm must be > 0"),
            (math.isfinite(self.translation_scale_nm) and self.translation_scale_nm >= 0,
             "translation_scale_nm must be >= 0"),
            (not (self.freeze_translations and self.freeze_wave), "cannot freeze both blocks"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)


class StopReason(str, enum.Enum):
    """Why the solver stopped."""

    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    STALLED = "stalled"


@dataclass(frozen=True)
class GroundTruth:
    """Known solution for error reporting.

    Attributes:
        psi (ComplexField): True wave on the reconstruction grid.
        translations_nm (Tuple[Vector, ...]): True translations.
    """

    psi: ComplexField
    translations_nm: Tuple[Vector, ...]


@dataclass(frozen=True)
class IterationRecord:
    """One row of the iteration log.

    Attributes:
        iteration (int): 0 for the starting point, then one per accepted step.
        energy (EnergyBreakdown): Energy parts after the step.
        step (float): Accepted step length (0 for the starting point).
        grad_norm_wave (float): Norm of the wave gradient.
        grad_norm_trans (float): Norm of the free translation gradients.
        trans_err_sup_px (Optional[float]): Largest per-image translation error in pixels.
        trans_err_euc_px (Optional[float]): Euclidean norm of all translation errors in pixels.
        wave_err_sup (Optional[float]): Relative sup-norm error of the gauge-aligned real-space wave.
        wave_err_euc (Optional[float]): Relative L² error of the gauge-aligned wave.
    """

    iteration: int
    energy: EnergyBreakdown
    step: float
    grad_norm_wave: float
    grad_norm_trans: float
    trans_err_sup_px: Optional[float] = None
    trans_err_euc_px: Optional[float] = None
    wave_err_sup: Optional[float] = None
    wave_err_euc: Optional[float] = None

    def row(self) -> Tuple[str, ...]:
        """CSV cells; floats use their shortest round-tripping text.

        Returns:
            Tuple[str, ...]: Cells in LOG_COLUMNS order, blanks for unknown errors.
        """
        def cell(value: Optional[float]) -> str:
            return "" if value is None else repr(float(value))
        return (str(self.iteration), cell(self.energy.total), cell(self.energy.data_term),
                cell(self.energy.regularizer), cell(self.step), cell(self.grad_norm_wave),
                cell(self.grad_norm_trans), cell(self.trans_err_sup_px), cell(self.trans_err_euc_px),
                cell(self.wave_err_sup), cell(self.wave_err_euc))


def write_log(records: Iterable[IterationRecord], path: Union[str, Path]) -> None:
    """Write the iteration log as CSV.

    Args:
        records (Iterable[IterationRecord]): Rows.
        path (Union[str, Path]): Destination.

    Raises:
        StorageError: If the file cannot be written.
    """
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(LOG_COLUMNS)
            for record in records:
                writer.writerow(record.row())
    except OSError as e:
        raise StorageError(f"cannot write iteration log {path}: {e}") from e


def init_wave(series: FocusSeries) -> ComplexField:
    """Constant wave with the square root of the mean intensity.

    Args:
        series (FocusSeries): Data.

    Returns:
        ComplexField: Plane wave in Fourier space.

    Raises:
        ValidationError: If the mean intensity is negative.
    """
    mean = float(np.mean([np.mean(g.values) for g in series.images]))
    if mean < 0:
        raise ValidationError(f"mean image intensity is negative ({mean:.3e}); the data is corrupt")
    return ComplexField.plane_wave(series.spec, math.sqrt(mean))


def _parabolic_offset(minus: float, center: float, plus: float) -> float:
    curvature = minus - 2.0 * center + plus
    if curvature >= 0.0:
        return 0.0
    return float(np.clip((minus - plus) / (2.0 * curvature), -0.5, 0.5))


def _peak(corr: RealArray, center: int) -> Optional[Tuple[int, int]]:
    """Array position of the correlation maximum closest to zero lag, None for a flat surface."""
    top, bottom = float(np.max(corr)), float(np.min(corr))
    if top - bottom <= 1e-12 * max(abs(top), abs(bottom), np.finfo(np.float64).tiny):
        return None
    rows, cols = np.nonzero(corr >= top - 1e-9 * abs(top))
    lags = (rows - center) ** 2 + (cols - center) ** 2
    best = int(np.argmin(lags))
    return int(rows[best]), int(cols[best])


def init_translations(series: FocusSeries, subpixel: bool = True) -> Tuple[Vector, ...]:
    """Register consecutive images by cross-correlation and accumulate the shifts.

    Args:
        series (FocusSeries): Data.
        subpixel (bool): Refine each correlation peak with a 3-point parabola per axis.

    Returns:
        Tuple[Vector, ...]: Absolute translations, the first (0, 0).
    """
    spec = series.spec
    n, center, h = spec.n, spec.center, spec.pixel_size
    shifts: List[Vector] = [(0.0, 0.0)]
    total = np.zeros(2)
    for j in range(1, len(series)):
        prev = series.images[j - 1].values
        cur = series.images[j].values
        corr = xcorr_arrays(prev - np.mean(prev), cur - np.mean(cur), spec, Space.REAL).real
        peak = _peak(corr, center)
        if peak is None:
            logger.warning("flat correlation between images %d and %d; assuming no shift", j - 1, j)
        else:
            r, c = peak
            lag = np.array([r - center, c - center], dtype=np.float64)
            if subpixel:
                lag[0] += _parabolic_offset(corr[(r - 1) % n, c], corr[r, c], corr[(r + 1) % n, c])
                lag[1] += _parabolic_offset(corr[r, (c - 1) % n], corr[r, c], corr[r, (c + 1) % n])
            total = total + lag * h
        shifts.append((float(total[0]), float(total[1])))
    return tuple(shifts)


def _align_shift(ref: ComplexArray, est: ComplexArray, spec: Any, start: RealArray) -> RealArray:
    """Shift s maximizing |⟨ref, est·μ_{-s}⟩|, refined by BFGS from an integer start."""
    v_rows, v_cols = spec.frequencies()
    base = np.conj(ref) * est
    scale = float(np.sum(np.abs(ref) ** 2) * np.sum(np.abs(est) ** 2))

    def cost(s: RealArray) -> Tuple[float, RealArray]:
        weighted = base * np.exp(-2j * np.pi * (v_rows * s[0] + v_cols * s[1]))
        c = np.sum(weighted)
        dc = np.array([np.sum(-2j * np.pi * v_rows * weighted), np.sum(-2j * np.pi * v_cols * weighted)])
        value = -float(abs(c) ** 2) / scale
        grad = -2.0 * np.real(np.conj(c) * dc) / scale
        return value, grad

    result = optimize.minimize(cost, start, jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 50})
    return np.asarray(result.x if result.fun <= cost(start)[0] else start, dtype=np.float64)


def gauge_align(psi_est: ComplexField, psi_ref: ComplexField) -> ComplexField:
    """Remove the global phase and modulation separating an estimate from a reference.

    Args:
        psi_est (ComplexField): Estimated Fourier-space wave.
        psi_ref (ComplexField): Reference wave on the same grid.

    Returns:
        ComplexField: psi_est·e^{-ic}·μ_{-s}; psi_est unchanged for a zero reference.

    Raises:
        ValidationError: If the grids or spaces differ.
    """
    if psi_est.spec != psi_ref.spec or psi_est.space is not Space.FOURIER or psi_ref.space is not Space.FOURIER:
        raise ValidationError("gauge_align expects two Fourier-space waves on one grid")
    if not np.any(psi_ref.values) or not np.any(psi_est.values):
        return psi_est
    spec = psi_est.spec
    ref_real = inverse_array(psi_ref.values, spec)
    est_real = inverse_array(psi_est.values, spec)
    corr = np.abs(xcorr_arrays(ref_real, est_real, spec, Space.REAL))
    r, c = np.unravel_index(int(np.argmax(corr)), corr.shape)
    start = np.array([spec.center - r, spec.center - c], dtype=np.float64) * spec.pixel_size
    shift = _align_shift(psi_ref.values, psi_est.values, spec, start)
    aligned = modulate(psi_est, (-float(shift[0]), -float(shift[1])))
    phase = np.angle(np.vdot(psi_ref.values, aligned.values))
    return aligned.with_values(aligned.values * np.exp(-1j * phase))


def wave_errors(psi: ComplexField, truth: ComplexField) -> Tuple[float, float]:
    """Relative sup and L² errors of a gauge-aligned wave.

    Args:
        psi (ComplexField): Estimate.
        truth (ComplexField): Reference.

    Returns:
        Tuple[float, float]: (sup error in real space, Euclidean error), both relative to the reference.
    """
    aligned = gauge_align(psi, truth)
    diff = aligned.with_values(aligned.values - truth.values)
    truth_real = inverse_spectral_transform(truth).values
    sup_ref = float(np.max(np.abs(truth_real))) or 1.0
    euc_ref = l2_norm(truth) or 1.0
    sup = float(np.max(np.abs(inverse_spectral_transform(diff).values))) / sup_ref
    return sup, l2_norm(diff) / euc_ref


def translation_errors(translations: RealArray, truth: Sequence[Vector], pixel_size: float) -> Tuple[float, float]:
    """Translation errors in pixels.

    Args:
        translations (RealArray): Estimates, shape (N, 2).
        truth (Sequence[Vector]): True translations.
        pixel_size (float): Pixel size in nm.

    Returns:
        Tuple[float, float]: (largest per-image Euclidean error, Euclidean norm over all images).
    """
    diff = (translations - np.asarray(truth, dtype=np.float64)) / pixel_size
    per_image = np.sqrt(np.sum(diff ** 2, axis=1))
    return float(np.max(per_image)), float(math.sqrt(float(np.sum(diff ** 2))))


def auto_translation_scale(objective: Objective, series: FocusSeries) -> float:
    """Translation unit balancing the wave and translation curvatures of the energy.

    Args:
        objective (Objective): Prepared objective.
        series (FocusSeries): Data.

    Returns:
        float: Scale in nm; the extent when the images carry no gradient information.
    """
    mean = float(np.mean([np.mean(g.values) for g in series.images]))
    c_psi = 8.0 * max(mean, 0.0)
    v_rows, v_cols = series.spec.frequencies()
    cell = series.spec.cell_area(Space.FOURIER)
    n_images = objective.count
    curvatures = [2.0 / n_images * float(np.sum(np.abs(2.0 * np.pi * v * g) ** 2)) * cell
                  for g in objective.data for v in (v_rows, v_cols)]
    c_t = float(np.mean(curvatures))
    if c_psi <= 0.0 or c_t <= 0.0:
        return series.spec.extent_nm
    return math.sqrt(c_psi / c_t)


@dataclass
class _State:
    psi: ComplexArray
    tau: RealArray
    evaluation: Evaluation
    grad_psi: ComplexArray = field(init=False)
    grad_tau: RealArray = field(init=False)


class Minimizer:
    """Fletcher–Reeves CG with Armijo steps over wave and translations.

    Attributes:
        objective (Objective): Energy and gradients.
        cfg (SolverConfig): Settings.
        truth (Optional[GroundTruth]): Reference for error columns.
        scale (float): Translation unit of the packed vector in nm.
        bound (float): Radius of the admissible translations in nm.
        stop_reason (Optional[StopReason]): Set when run() returns.
        restarts (int): Number of steepest-descent restarts.
    """

    def __init__(self, objective: Objective, cfg: SolverConfig, truth: Optional[GroundTruth] = None) -> None:
        """
        Prepare a solver.

        Args:
            objective (Objective): Energy and gradients.
            cfg (SolverConfig): Settings.
            truth (Optional[GroundTruth]): Reference for error columns.
        """
        self.objective = objective
        self.cfg = cfg
        self.truth = truth
        spec = objective.spec
        self.scale = cfg.translation_scale_nm or auto_translation_scale(objective, objective.series)
        self.bound = cfg.translation_bound_nm or 0.5 * spec.extent_nm
        self.stop_reason: Optional[StopReason] = None
        self.restarts = 0
        self._cell = spec.cell_area(Space.FOURIER)

    def _inner(self, psi_a: ComplexArray, tau_a: RealArray, psi_b: ComplexArray, tau_b: RealArray) -> float:
        return float(np.vdot(psi_a, psi_b).real * self._cell + np.sum(tau_a * tau_b))

    def _project(self, tau: RealArray) -> RealArray:
        t = tau * self.scale
        t[0] = 0.0
        norms = np.sqrt(np.sum(t ** 2, axis=1))
        outside = norms > self.bound
        if np.any(outside):
            logger.warning("clamping %d translation(s) to the %.4g nm ball", int(np.sum(outside)), self.bound)
            t[outside] *= (self.bound / norms[outside])[:, None]
        return t / self.scale

    def _evaluate(self, psi: ComplexArray, tau: RealArray, gradients: bool = True) -> Evaluation:
        return self.objective.evaluate_arrays(psi, tau * self.scale, gradients)

    def _state(self, psi: ComplexArray, tau: RealArray) -> _State:
        state = _State(psi, tau, self._evaluate(psi, tau))
        grad_psi = state.evaluation.grad_wave.copy()
        grad_tau = state.evaluation.grad_translation * self.scale
        grad_tau[0] = 0.0
        if self.cfg.freeze_wave:
            grad_psi[...] = 0.0
        if self.cfg.freeze_translations:
            grad_tau[...] = 0.0
        state.grad_psi, state.grad_tau = grad_psi, grad_tau
        return state

    def _record(self, iteration: int, state: _State, step: float) -> IterationRecord:
        grad_t = state.grad_tau / self.scale
        record = IterationRecord(
            iteration=iteration,
            energy=state.evaluation.energy,
            step=step,
            grad_norm_wave=math.sqrt(max(float(np.vdot(state.grad_psi, state.grad_psi).real) * self._cell, 0.0)),
            grad_norm_trans=float(np.sqrt(np.sum(grad_t ** 2))),
        )
        if self.truth is None:
            return record
        spec = self.objective.spec
        t_sup, t_euc = translation_errors(state.tau * self.scale, self.truth.translations_nm, spec.pixel_size)
        w_sup, w_euc = wave_errors(ComplexField(spec, state.psi, Space.FOURIER), self.truth.psi)
        return IterationRecord(record.iteration, record.energy, record.step, record.grad_norm_wave,
                               record.grad_norm_trans, t_sup, t_euc, w_sup, w_euc)

    def _armijo(self, state: _State, d_psi: ComplexArray, d_tau: RealArray, slope: float,
                first_step: float) -> Tuple[Optional[_State], float, float]:
        """Backtrack until the sufficient-decrease test passes.

        Returns:
            Tuple[Optional[_State], float, float]: Accepted state (None on failure), step, last trial energy.
        """
        e0 = state.evaluation.energy.total
        step = first_step
        trial_energy = e0
        for backtrack in range(self.cfg.armijo_max_backtracks):
            psi = state.psi + step * d_psi
            tau = self._project(state.tau + step * d_tau)
            trial_energy = self._evaluate(psi, tau, gradients=False).energy.total
            if trial_energy <= e0 + self.cfg.armijo_sigma * step * slope:
                logger.debug("Armijo accepted step %.3e after %d backtrack(s)", step, backtrack)
                return self._state(psi, tau), step, trial_energy
            step *= self.cfg.armijo_backtrack
        return None, step, trial_energy

    def _exact_step(self, state: _State, d_psi: ComplexArray) -> Optional[float]:
        coeffs = self.objective.line_coefficients_arrays(state.psi, d_psi, state.tau * self.scale)
        roots = np.roots([4.0 * coeffs[4], 3.0 * coeffs[3], 2.0 * coeffs[2], coeffs[1]])
        candidates = [float(r.real) for r in roots if abs(r.imag) <= 1e-10 * max(1.0, abs(r)) and r.real > 0]
        if not candidates:
            return None
        return min(candidates, key=lambda s: float(np.polynomial.polynomial.polyval(s, coeffs)))

    def run(self, variables: ReconstructionVariables) -> Tuple[ReconstructionVariables, List[IterationRecord]]:
        """Minimize from a starting point.

        Args:
            variables (ReconstructionVariables): Start.

        Returns:
            Tuple[ReconstructionVariables, List[IterationRecord]]: Final point and the log.

        Raises:
            ValidationError: If the start does not fit the objective.
            NumericalError: If the line search fails twice in a row away from a flat region.
        """
        objective = self.objective
        if variables.psi.spec != objective.spec or len(variables.translations_nm) != objective.count:
            raise ValidationError("starting point does not match the series")
        if self.cfg.alpha == 0.0:
            logger.warning("alpha = 0: the functional is not coercive and minimizers need not exist")
        psi0 = variables.psi.values * objective.mask
        state = self._state(psi0, self._project(variables.translation_array() / self.scale))
        records = [self._record(0, state, 0.0)]
        logger.info("solver start: energy %.6e, %d image(s), translation scale %.4g nm",
                    state.evaluation.energy.total, objective.count, self.scale)
        d_psi, d_tau = -state.grad_psi, -state.grad_tau
        gg = self._inner(state.grad_psi, state.grad_tau, state.grad_psi, state.grad_tau)
        first_step = self.cfg.armijo_initial_step
        steepest = True
        self.stop_reason = StopReason.MAX_ITERATIONS
        iteration = 0
        while iteration < self.cfg.max_iters:
            if gg == 0.0:
                self.stop_reason = StopReason.CONVERGED
                break
            slope = self._inner(state.grad_psi, state.grad_tau, d_psi, d_tau)
            if slope >= 0.0:
                logger.warning("iteration %d: not a descent direction, restarting", iteration + 1)
                self.restarts += 1
                d_psi, d_tau, slope, steepest = -state.grad_psi, -state.grad_tau, -gg, True
            new_state: Optional[_State] = None
            step, trial_energy = 0.0, state.evaluation.energy.total
            if self.cfg.exact_line_search and not np.any(d_tau):
                exact = self._exact_step(state, d_psi)
                if exact is not None:
                    trial = self._state(state.psi + exact * d_psi, state.tau)
                    if trial.evaluation.energy.total <= state.evaluation.energy.total:
                        new_state, step = trial, exact
            if new_state is None:
                new_state, step, trial_energy = self._armijo(state, d_psi, d_tau, slope, first_step)
            if new_state is None and not steepest:
                logger.warning("iteration %d: Armijo failed, restarting with steepest descent", iteration + 1)
                self.restarts += 1
                d_psi, d_tau, slope, steepest = -state.grad_psi, -state.grad_tau, -gg, True
                new_state, step, trial_energy = self._armijo(state, d_psi, d_tau, slope,
                                                             self.cfg.armijo_initial_step)
            if new_state is None:
                if abs(trial_energy - state.evaluation.energy.total) <= self.cfg.epsilon_stop:
                    self.stop_reason = StopReason.CONVERGED
                    break
                raise NumericalError(f"Armijo line search failed twice at iteration {iteration + 1} "
                                     f"(energy {state.evaluation.energy.total:.6e}, slope {slope:.3e})")
            first_step = step / self.cfg.armijo_backtrack
            iteration += 1
            decrease = state.evaluation.energy.total - new_state.evaluation.energy.total
            moved = bool(np.any(new_state.psi != state.psi) or np.any(new_state.tau != state.tau))
            state = new_state
            records.append(self._record(iteration, state, step))
            logger.debug("iteration %d: energy %.6e, step %.3e", iteration, state.evaluation.energy.total, step)
            if not moved:
                self.stop_reason = StopReason.STALLED
                break
            if decrease < self.cfg.epsilon_stop:
                self.stop_reason = StopReason.CONVERGED
                break
            gg_new = self._inner(state.grad_psi, state.grad_tau, state.grad_psi, state.grad_tau)
            if iteration % self.cfg.restart_period == 0:
                d_psi, d_tau = -state.grad_psi, -state.grad_tau
                steepest = True
            else:
                beta = gg_new / gg
                d_psi, d_tau = -state.grad_psi + beta * d_psi, -state.grad_tau + beta * d_tau
                steepest = False
            gg = gg_new
        final = ReconstructionVariables(
            ComplexField(objective.spec, state.psi, Space.FOURIER),
            tuple((float(t[0]), float(t[1])) for t in state.tau * self.scale),
        )
        logger.info("solver stop: %s after %d iteration(s), energy %.6e (data %.6e, regularizer %.6e)",
                    self.stop_reason.value, iteration, state.evaluation.energy.total,
                    state.evaluation.energy.data_term, state.evaluation.energy.regularizer)
        return final, records


def minimize(variables: ReconstructionVariables, series: FocusSeries, kernels: Sequence[FactorizedKernel],
             cfg: SolverConfig, truth: Optional[GroundTruth] = None,
             prior: Optional[ComplexField] = None) -> Tuple[ReconstructionVariables, List[IterationRecord]]:
    """Reconstruct wave and translations from a starting point.

    Args:
        variables (ReconstructionVariables): Start.
        series (FocusSeries): Data.
        kernels (Sequence[FactorizedKernel]): Kernel per image.
        cfg (SolverConfig): Settings.
        truth (Optional[GroundTruth]): Reference for error columns.
        prior (Optional[ComplexField]): Prior wave Ψ_M (zero when None).

    Returns:
        Tuple[ReconstructionVariables, List[IterationRecord]]: Final point and iteration log.
    """
    objective = Objective(series, kernels, RegularizerSpec(cfg.alpha, prior))
    return Minimizer(objective, cfg, truth).run(variables)


def initial_variables(series: FocusSeries, subpixel: bool = True) -> ReconstructionVariables:
    """Starting point from the constant wave and correlation registration.

    Args:
        series (FocusSeries): Data.
        subpixel (bool): Refine correlation peaks.

    Returns:
        ReconstructionVariables: Start for :func:`minimize`.
    """
    return ReconstructionVariables(init_wave(series), init_translations(series, subpixel))
