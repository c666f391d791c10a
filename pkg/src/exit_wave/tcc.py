"""Aberrations, envelopes and transmission cross-coefficients.

Pointwise functions take frequencies as arrays whose last axis holds the
(row, column) components in nm^-1 and broadcast over the leading axes.
"""
import logging
import math

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import ValidationError
from .fields import ComplexArray, ComplexField, GridSpec, RealArray, Space, band_mask
from .metadata import Metadata
from .storage import FieldStore
from .wcc import FactorList

logger = logging.getLogger(__name__)

Frequencies = npt.ArrayLike

ORACLE_MAX_M = 8
FOCAL_SPAN = 3.0


@dataclass(frozen=True)
class OpticalParams:
    """Microscope constants; defaults are a 300 kV instrument with negative C_s.

    Attributes:
        lambda_nm (float): Electron wavelength in nm.
        cs_nm (float): Spherical aberration coefficient in nm (signed).
        alpha_max_rad (float): Objective aperture semiangle in rad.
        delta_nm (float): Focus spread in nm.
        alpha_conv_rad (float): Beam convergence semiangle in rad.
    """

    lambda_nm: float = 0.00196875
    cs_nm: float = -70.0
    alpha_max_rad: float = 0.125
    delta_nm: float = 0.0
    alpha_conv_rad: float = 0.0

    def __post_init__(self) -> None:
        """Validate the constants.

        Raises:
            ValidationError: If any constant is non-finite or out of range.
        """
        for name in ("lambda_nm", "cs_nm", "alpha_max_rad", "delta_nm", "alpha_conv_rad"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.lambda_nm <= 0:
            raise ValidationError(f"lambda_nm must be positive, got {self.lambda_nm}")
        if self.alpha_max_rad <= 0:
            raise ValidationError(f"alpha_max_rad must be positive, got {self.alpha_max_rad}")
        if self.delta_nm < 0 or self.alpha_conv_rad < 0:
            raise ValidationError("delta_nm and alpha_conv_rad must be nonnegative")

    @property
    def aperture_radius(self) -> float:
        """Aperture radius r_a = alpha_max / lambda in nm^-1."""
        return self.alpha_max_rad / self.lambda_nm

    @property
    def coherent(self) -> bool:
        """True when neither envelope damps."""
        return self.delta_nm == 0.0 and self.alpha_conv_rad == 0.0


def _as_vectors(v: Frequencies) -> RealArray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1:] != (2,):
        raise ValidationError(f"frequencies need a trailing axis of length 2, got shape {arr.shape}")
    return arr


def _sq_norm(v: RealArray) -> RealArray:
    return np.asarray(np.sum(v * v, axis=-1), dtype=np.float64)


def chi(v: Frequencies, z_nm: Union[float, RealArray], p: OpticalParams) -> RealArray:
    """Wave aberration χ_Z(v) = ½Zλ|v|² + ¼C_sλ³|v|⁴.

    Args:
        v (Frequencies): Frequencies with a trailing (row, column) axis.
        z_nm (Union[float, RealArray]): Defocus Z in nm; arrays broadcast against |v|².
        p (OpticalParams): Microscope constants.

    Returns:
        RealArray: χ for every frequency (0-d for a single vector).
    """
    r2 = _sq_norm(_as_vectors(v))
    lam = p.lambda_nm
    return 0.5 * z_nm * lam * r2 + 0.25 * p.cs_nm * lam ** 3 * r2 * r2


def chi_gradient(v: Frequencies, z_nm: float, p: OpticalParams) -> RealArray:
    """Analytic gradient ∇χ_Z(v) = (Zλ + C_sλ³|v|²)·v.

    Args:
        v (Frequencies): Frequencies with a trailing (row, column) axis.
        z_nm (float): Defocus Z in nm.
        p (OpticalParams): Microscope constants.

    Returns:
        RealArray: Gradients with the same shape as v.
    """
    vv = _as_vectors(v)
    lam = p.lambda_nm
    scale = z_nm * lam + p.cs_nm * lam ** 3 * _sq_norm(vv)
    return np.asarray(scale[..., None] * vv, dtype=np.float64)


def pupil(v: Frequencies, z_nm: Union[float, RealArray], p: OpticalParams) -> ComplexArray:
    """Pupil phase factor p_Z(v) = exp(-2πi χ_Z(v)).

    Args:
        v (Frequencies): Frequencies.
        z_nm (Union[float, RealArray]): Defocus in nm; arrays broadcast against |v|².
        p (OpticalParams): Microscope constants.

    Returns:
        ComplexArray: Unit-modulus values.
    """
    return np.asarray(np.exp(-2j * np.pi * chi(v, z_nm, p)), dtype=np.complex128)


def aperture(v: Frequencies, p: OpticalParams) -> RealArray:
    """Hard aperture indicator of |v| < r_a.

    Args:
        v (Frequencies): Frequencies.
        p (OpticalParams): Microscope constants.

    Returns:
        RealArray: 1.0 inside the aperture, 0.0 outside.
    """
    r2 = _sq_norm(_as_vectors(v))
    return np.where(r2 < p.aperture_radius ** 2, 1.0, 0.0)


def spatial_envelope(v: Frequencies, w: Frequencies, z_nm: float, p: OpticalParams) -> RealArray:
    """Spatial coherence envelope exp(-(πα/λ)²|∇χ(v) - ∇χ(w)|²).

    Args:
        v (Frequencies): First frequencies.
        w (Frequencies): Second frequencies, broadcastable against v.
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants (alpha_conv_rad is α).

    Returns:
        RealArray: Envelope values in (0, 1].
    """
    diff = chi_gradient(v, z_nm, p) - chi_gradient(w, z_nm, p)
    factor = (math.pi * p.alpha_conv_rad / p.lambda_nm) ** 2
    return np.asarray(np.exp(-factor * _sq_norm(diff)), dtype=np.float64)


def temporal_envelope(v: Frequencies, w: Frequencies, p: OpticalParams) -> RealArray:
    """Temporal coherence envelope exp(-½(πΔλ)²(|v|² - |w|²)²).

    Args:
        v (Frequencies): First frequencies.
        w (Frequencies): Second frequencies.
        p (OpticalParams): Microscope constants (delta_nm is Δ).

    Returns:
        RealArray: Envelope values in (0, 1].
    """
    d = _sq_norm(_as_vectors(v)) - _sq_norm(_as_vectors(w))
    return np.asarray(np.exp(-0.5 * (math.pi * p.delta_nm * p.lambda_nm) ** 2 * d * d), dtype=np.float64)


def tcc_ishizuka_eval(v: Frequencies, w: Frequencies, z_nm: float, p: OpticalParams,
                      rank_one: bool = False) -> ComplexArray:
    """Ishizuka TCC p_Z(v)conj(p_Z(w))a(v)a(w)E_s(v,w)E_t(v,w).

    Args:
        v (Frequencies): First frequencies.
        w (Frequencies): Second frequencies.
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants.
        rank_one (bool): Replace E_s(v, w) by E_s(v, 0)E_s(w, 0), the form the factorized kernel uses.

    Returns:
        ComplexArray: TCC values.
    """
    vv, ww = _as_vectors(v), _as_vectors(w)
    if rank_one:
        zero = np.zeros(2)
        e_s = spatial_envelope(vv, zero, z_nm, p) * spatial_envelope(ww, zero, z_nm, p)
    else:
        e_s = spatial_envelope(vv, ww, z_nm, p)
    value = (pupil(vv, z_nm, p) * np.conj(pupil(ww, z_nm, p)) * aperture(vv, p) * aperture(ww, p)
             * e_s * temporal_envelope(vv, ww, p))
    return np.asarray(value, dtype=np.complex128)


def focal_quadrature(delta_nm: float, n_focal: int) -> Tuple[RealArray, RealArray]:
    """Nodes and weights for averaging over the Gaussian focus spread.

    Nodes are uniform on [-3Δ, 3Δ]; weights are proportional to the density
    and sum to 1. A zero spread collapses to the single node 0.

    Args:
        delta_nm (float): Focus spread Δ in nm.
        n_focal (int): Odd node count.

    Returns:
        Tuple[RealArray, RealArray]: Nodes in nm and nonnegative weights.

    Raises:
        ValidationError: If n_focal is not a positive odd integer or Δ is negative.
    """
    if isinstance(n_focal, bool) or not isinstance(n_focal, (int, np.integer)) or n_focal < 1 or n_focal % 2 == 0:
        raise ValidationError(f"n_focal must be a positive odd integer, got {n_focal!r}")
    if not delta_nm >= 0:
        raise ValidationError(f"focus spread must be nonnegative, got {delta_nm!r}")
    if delta_nm == 0.0 or n_focal == 1:
        return np.zeros(1), np.ones(1)
    nodes = np.linspace(-FOCAL_SPAN * delta_nm, FOCAL_SPAN * delta_nm, int(n_focal))
    weights = np.exp(-0.5 * (nodes / delta_nm) ** 2)
    return nodes, weights / np.sum(weights)


def _focal_factors(v: Frequencies, z_nm: float, p: OpticalParams,
                   nodes: RealArray, weights: RealArray) -> ComplexArray:
    """Evaluate every focal factor at arbitrary frequencies.

    Args:
        v (Frequencies): Frequencies.
        z_nm (float): Defocus Z in nm.
        p (OpticalParams): Microscope constants.
        nodes (RealArray): Focal offsets z_j.
        weights (RealArray): Weights q_j.

    Returns:
        ComplexArray: Shape (J, *v.shape[:-1]).
    """
    vv = _as_vectors(v)
    common = aperture(vv, p) * spatial_envelope(vv, np.zeros(2), z_nm, p)
    return np.stack([math.sqrt(q) * common * pupil(vv, z_nm + z, p) for z, q in zip(nodes, weights)])


def _lattice_vectors(spec: GridSpec) -> RealArray:
    v_rows, v_cols = spec.frequencies()
    return np.stack([v_rows, v_cols], axis=-1)


@dataclass(frozen=True, eq=False)
class FactorizedKernel:
    """Focal-integration factorization T(v, w) = Σ_j t_j(v)conj(t_j(w)).

    Attributes:
        focus_nm (float): Defocus Z of the image the kernel belongs to.
        factors (FactorList): Aperture-masked Fourier-space factor fields.
        nodes (Tuple[float, ...]): Focal offsets z_j in nm.
        weights (Tuple[float, ...]): Quadrature weights q_j.
        params (OpticalParams): Constants the kernel was built from.
    """

    focus_nm: float
    factors: FactorList
    nodes: Tuple[float, ...]
    weights: Tuple[float, ...]
    params: OpticalParams

    @property
    def spec(self) -> GridSpec:
        """Grid the factors are sampled on."""
        return self.factors.spec

    @property
    def node_count(self) -> int:
        """Number of factors."""
        return len(self.factors)

    def reconstruct(self, v_idx: npt.ArrayLike, w_idx: npt.ArrayLike) -> ComplexArray:
        """Evaluate Σ_j t_j(v)conj(t_j(w)) at lattice index pairs.

        Args:
            v_idx (npt.ArrayLike): Integer lattice indices (row, column), k in [-n/2, n/2).
            w_idx (npt.ArrayLike): Same shape as v_idx.

        Returns:
            ComplexArray: Kernel values with the leading shape of the index arrays.

        Raises:
            ValidationError: For indices outside the lattice.
        """
        n, center = self.spec.n, self.spec.center
        vi = np.asarray(v_idx, dtype=np.int64) + center
        wi = np.asarray(w_idx, dtype=np.int64) + center
        if vi.shape[-1:] != (2,) or vi.shape != wi.shape:
            raise ValidationError("index arrays need matching shapes with a trailing axis of length 2")
        if np.any((vi < 0) | (vi >= n) | (wi < 0) | (wi >= n)):
            raise ValidationError(f"lattice index outside [-{center}, {n - center})")
        stack = self.factors.stack()
        tv = stack[:, vi[..., 0], vi[..., 1]]
        tw = stack[:, wi[..., 0], wi[..., 1]]
        return np.asarray(np.sum(tv * np.conj(tw), axis=0), dtype=np.complex128)

    def manifest(self) -> Metadata:
        """Describe the kernel for a dump manifest.

        Returns:
            Metadata: Focus, grid, constants and quadrature.
        """
        return {
            "focus_nm": self.focus_nm,
            "n": self.spec.n,
            "extent_nm": self.spec.extent_nm,
            "lambda_nm": self.params.lambda_nm,
            "cs_nm": self.params.cs_nm,
            "alpha_max_rad": self.params.alpha_max_rad,
            "delta_nm": self.params.delta_nm,
            "alpha_conv_rad": self.params.alpha_conv_rad,
            "nodes_nm": self.nodes,
            "weights": self.weights,
        }


def build_factorized_kernel(spec: GridSpec, z_nm: float, p: OpticalParams, n_focal: int = 7) -> FactorizedKernel:
    """Factorize the Ishizuka TCC by focal integration with rank-1 spatial coherence.

    Args:
        spec (GridSpec): Grid the factors are sampled on.
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants.
        n_focal (int): Odd number of focal nodes (ignored when delta_nm is 0).

    Returns:
        FactorizedKernel: Kernel with one factor per focal node.

    Raises:
        ValidationError: If n_focal is not a positive odd integer or Z is not finite.
    """
    if not math.isfinite(z_nm):
        raise ValidationError(f"focus must be finite, got {z_nm!r}")
    nodes, weights = focal_quadrature(p.delta_nm, n_focal)
    mask = band_mask(spec, p.aperture_radius)
    values = _focal_factors(_lattice_vectors(spec), z_nm, p, nodes, weights) * mask.values
    factors = FactorList(spec, tuple(ComplexField(spec, t, Space.FOURIER) for t in values), mask)
    logger.debug("built kernel Z=%.4g nm with %d factor(s) on %d^2", z_nm, len(factors), spec.n)
    return FactorizedKernel(float(z_nm), factors, tuple(float(z) for z in nodes),
                            tuple(float(q) for q in weights), p)


def build_kernels(spec: GridSpec, foci_nm: Sequence[float], p: OpticalParams,
                  n_focal: int = 7) -> Tuple[FactorizedKernel, ...]:
    """Build one kernel per focus.

    Args:
        spec (GridSpec): Grid.
        foci_nm (Sequence[float]): Defocus values.
        p (OpticalParams): Microscope constants.
        n_focal (int): Focal node count.

    Returns:
        Tuple[FactorizedKernel, ...]: Kernels in focus order.
    """
    return tuple(build_factorized_kernel(spec, float(z), p, n_focal) for z in foci_nm)


@dataclass(frozen=True)
class GaussianDensity:
    """Centered Gaussian probability density in one or two dimensions.

    Attributes:
        sigma (float): Standard deviation per axis (0 is a point mass).
        dims (int): Dimension, 1 for focus spread and 2 for the source.
    """

    sigma: float
    dims: int = 1

    def __post_init__(self) -> None:
        """Validate the width.

        Raises:
            ValidationError: If sigma is negative or dims is not 1 or 2.
        """
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError(f"density width must be finite and nonnegative, got {self.sigma!r}")
        if self.dims not in (1, 2):
            raise ValidationError(f"density dimension must be 1 or 2, got {self.dims!r}")

    def __call__(self, x: npt.ArrayLike) -> RealArray:
        """Density values.

        Args:
            x (npt.ArrayLike): Points; for dims=2 the last axis holds the components.

        Returns:
            RealArray: Density at each point.
        """
        arr = np.asarray(x, dtype=np.float64)
        r2 = arr * arr if self.dims == 1 else _sq_norm(arr)
        norm = (2.0 * math.pi * self.sigma ** 2) ** (self.dims / 2.0)
        return np.asarray(np.exp(-0.5 * r2 / self.sigma ** 2) / norm, dtype=np.float64)

    def nodes(self, m: int) -> Tuple[RealArray, float]:
        """Uniform 1-D nodes on [-3σ, 3σ].

        Args:
            m (int): Half count; 2m+1 nodes are returned.

        Returns:
            Tuple[RealArray, float]: Nodes and their spacing (a single node 0 for a point mass).
        """
        if self.sigma == 0.0:
            return np.zeros(1), 1.0
        pts = np.linspace(-FOCAL_SPAN * self.sigma, FOCAL_SPAN * self.sigma, 2 * m + 1)
        return pts, float(pts[1] - pts[0])


def source_density(p: OpticalParams) -> GaussianDensity:
    """Gaussian source whose linearized TCC reproduces the spatial envelope.

    Args:
        p (OpticalParams): Microscope constants.

    Returns:
        GaussianDensity: 2-D density with σ = α / (λ√2) in nm^-1.
    """
    return GaussianDensity(p.alpha_conv_rad / (p.lambda_nm * math.sqrt(2.0)), dims=2)


def focus_density(p: OpticalParams) -> GaussianDensity:
    """Focus-spread density with σ = Δ.

    Args:
        p (OpticalParams): Microscope constants.

    Returns:
        GaussianDensity: 1-D density in nm.
    """
    return GaussianDensity(p.delta_nm, dims=1)


def riemann_quadrature(m: int, s: GaussianDensity,
                       f: GaussianDensity) -> Tuple[RealArray, RealArray, RealArray]:
    """Riemann nodes and weights of the general TCC integral, without the size guard.

    Args:
        m (int): Half count per axis.
        s (GaussianDensity): 2-D source density.
        f (GaussianDensity): 1-D focus-spread density.

    Returns:
        Tuple[RealArray, RealArray, RealArray]: Focal offsets (K,), source shifts (K, 2) and
        weights (K,) summing to 1.

    Raises:
        ValidationError: If m < 1 or the densities have the wrong dimension.
    """
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 1:
        raise ValidationError(f"quadrature half count must be a positive integer, got {m!r}")
    if s.dims != 2 or f.dims != 1:
        raise ValidationError("oracle needs a 2-D source density and a 1-D focus density")
    z_pts, dz = f.nodes(m)
    u_pts, du = s.nodes(m)
    zz, ur, uc = np.meshgrid(z_pts, u_pts, u_pts, indexing="ij")
    shifts = np.stack([ur.ravel(), uc.ravel()], axis=-1)
    offsets = zz.ravel()
    f_vals = f(offsets) if f.sigma > 0 else np.ones_like(offsets)
    s_vals = s(shifts) if s.sigma > 0 else np.ones(len(shifts))
    weights = dz * du * du * f_vals * s_vals
    return offsets, shifts, weights / np.sum(weights)


def oracle_quadrature(m: int, s: GaussianDensity,
                      f: GaussianDensity) -> Tuple[RealArray, RealArray, RealArray]:
    """Riemann nodes and weights of the general TCC integral.

    Args:
        m (int): Half count per axis, at most 8.
        s (GaussianDensity): 2-D source density.
        f (GaussianDensity): 1-D focus-spread density.

    Returns:
        Tuple[RealArray, RealArray, RealArray]: Focal offsets (K,), source shifts (K, 2) and
        weights (K,) summing to 1.

    Raises:
        ValidationError: If m is outside [1, 8] or the densities have the wrong dimension.
    """
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or not 1 <= m <= ORACLE_MAX_M:
        raise ValidationError(f"oracle half count must be in [1, {ORACLE_MAX_M}], got {m!r}")
    return riemann_quadrature(m, s, f)


def _oracle_values(v: Frequencies, z_nm: float, p: OpticalParams, m: int,
                   s: GaussianDensity, f: GaussianDensity) -> ComplexArray:
    vv = _as_vectors(v)
    offsets, shifts, weights = oracle_quadrature(m, s, f)
    a = aperture(vv, p)
    return np.stack([math.sqrt(q) * a * pupil(vv + u, z_nm + z, p)
                     for z, u, q in zip(offsets, shifts, weights)])


def riemann_tcc(v: Frequencies, w: Frequencies, z_nm: float, p: OpticalParams,
                quadrature: Tuple[RealArray, RealArray, RealArray], chunk: int = 1024) -> ComplexArray:
    """Sum the factorizable Riemann terms of the general TCC, a chunk of nodes at a time.

    Args:
        v (Frequencies): First frequencies.
        w (Frequencies): Second frequencies, same leading shape as v.
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants.
        quadrature (Tuple[RealArray, RealArray, RealArray]): Offsets, shifts and weights.
        chunk (int): Nodes evaluated per batch.

    Returns:
        ComplexArray: Aperture-masked TCC approximation.
    """
    vv, ww = _as_vectors(v), _as_vectors(w)
    offsets, shifts, weights = quadrature
    total = np.zeros(vv.shape[:-1], dtype=np.complex128)
    extra = (slice(None),) + (np.newaxis,) * (vv.ndim - 1)
    for lo in range(0, len(weights), chunk):
        z = (z_nm + offsets[lo:lo + chunk])[extra]
        u = shifts[lo:lo + chunk][extra]
        q = weights[lo:lo + chunk][extra]
        terms = q * pupil(vv + u, z, p) * np.conj(pupil(ww + u, z, p))
        total += np.sum(terms, axis=0)
    return np.asarray(total * aperture(vv, p) * aperture(ww, p), dtype=np.complex128)


def tcc_general_oracle(v: Frequencies, w: Frequencies, z_nm: float, p: OpticalParams, m: int,
                       s: GaussianDensity, f: GaussianDensity) -> ComplexArray:
    """Riemann-sum approximation of the general TCC with (2m+1)³ factorizable terms.

    Args:
        v (Frequencies): First frequencies.
        w (Frequencies): Second frequencies, same leading shape as v.
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants (aperture and aberrations).
        m (int): Half count per axis, at most 8.
        s (GaussianDensity): Source density.
        f (GaussianDensity): Focus-spread density.

    Returns:
        ComplexArray: Aperture-masked TCC approximation.
    """
    return riemann_tcc(v, w, z_nm, p, oracle_quadrature(m, s, f))


def general_oracle_factors(spec: GridSpec, z_nm: float, p: OpticalParams, m: int,
                           s: GaussianDensity, f: GaussianDensity) -> FactorList:
    """The oracle's terms as Fourier-space factor fields.

    Args:
        spec (GridSpec): Grid.
        z_nm (float): Defocus in nm.
        p (OpticalParams): Microscope constants.
        m (int): Half count per axis.
        s (GaussianDensity): Source density.
        f (GaussianDensity): Focus-spread density.

    Returns:
        FactorList: One aperture-masked factor per Riemann node.
    """
    mask = band_mask(spec, p.aperture_radius)
    values = _oracle_values(_lattice_vectors(spec), z_nm, p, m, s, f) * mask.values
    return FactorList(spec, tuple(ComplexField(spec, t, Space.FOURIER) for t in values), mask)


def dump_kernel(kernel: FactorizedKernel, directory: Union[str, Path]) -> FieldStore:
    """Write each factor as a field file plus a manifest of nodes and weights.

    Args:
        kernel (FactorizedKernel): Kernel to dump.
        directory (Union[str, Path]): Output directory.

    Returns:
        FieldStore: Store holding ``factor_000``, ``factor_001``, ...
    """
    store = FieldStore(directory, create=True)
    for index, (factor, z, q) in enumerate(zip(kernel.factors, kernel.nodes, kernel.weights)):
        key = f"factor_{index:03d}"
        store.extra[key] = {"node_nm": z, "weight": q}
        store[key] = factor
    manifest: Any = dict(kernel.manifest(), factor_count=kernel.node_count)
    store.write_manifest(manifest)
    logger.info("dumped %d kernel factor(s) to %s", kernel.node_count, store.directory)
    return store
