"""Weighted cross-correlation of sampled fields.

``(f ⋆_w g)(x) = Σ_y conj(f(y)) g(x + y) w(x + y, y) · cell`` with periodic
indexing, where ``cell`` is the lattice cell area of the fields' space.
"""
from dataclasses import dataclass
from typing import Any, Iterator, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import ValidationError
from .fields import ComplexArray, ComplexField, GridSpec, RealField, Space, to_dual_array

ORACLE_MAX_N = 16


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Explicit weight table w(x_a, y_b) for oracle-sized grids.

    ``entries[a0, a1, b0, b1]`` is the weight between the lattice points stored at
    array positions ``(a0, a1)`` and ``(b0, b1)``.

    Attributes:
        spec (GridSpec): Sampling the weight is tabulated on.
        entries (ComplexArray): Array of shape (n, n, n, n).
        hermitian (bool): Whether conj(w(x, y)) = w(y, x) is claimed (checked on construction).
    """

    spec: GridSpec
    entries: ComplexArray
    hermitian: bool = False

    def __post_init__(self) -> None:
        """Validate shape, size and the Hermitian flag.

        Raises:
            ValidationError: On oversized grids, wrong shape, non-finite entries or a false Hermitian claim.
        """
        n = self.spec.n
        if n > ORACLE_MAX_N:
            raise ValidationError(f"explicit weight tables are limited to {ORACLE_MAX_N}² grids, got {n}²")
        arr = np.array(self.entries, dtype=np.complex128, copy=True)
        if arr.shape != (n, n, n, n):
            raise ValidationError(f"weight table has shape {arr.shape}, expected {(n, n, n, n)}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("weight table holds non-finite entries")
        if self.hermitian:
            swapped = np.conj(np.transpose(arr, (2, 3, 0, 1)))
            if not np.allclose(arr, swapped, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(arr))))):
                raise ValidationError("weight table flagged Hermitian but conj(w(x, y)) != w(y, x)")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def constant(cls, spec: GridSpec, value: complex = 1.0) -> "WeightMatrix":
        """Weight that is the same for every pair.

        Args:
            spec (GridSpec): Sampling.
            value (complex): Constant weight.

        Returns:
            WeightMatrix: Constant table (Hermitian when value is real).
        """
        n = spec.n
        entries = np.full((n, n, n, n), value, dtype=np.complex128)
        return cls(spec, entries, hermitian=complex(value).imag == 0.0)

    @classmethod
    def from_factors(cls, factors: "FactorList") -> "WeightMatrix":
        """Tabulate w(x, y) = Σ_j v_j(x) conj(v_j(y)).

        Args:
            factors (FactorList): Factor fields.

        Returns:
            WeightMatrix: Hermitian table of the factorized weight.
        """
        n = factors.spec.n
        entries = np.zeros((n, n, n, n), dtype=np.complex128)
        for v in factors.stack():
            entries += np.einsum("ab,cd->abcd", v, np.conj(v))
        return cls(factors.spec, entries, hermitian=True)

    @property
    def sup(self) -> float:
        """Largest weight magnitude."""
        return float(np.max(np.abs(self.entries)))


@dataclass(frozen=True, eq=False)
class FactorList:
    """Factor fields v_j with w(x, y) = Σ_j v_j(x) conj(v_j(y)).

    Attributes:
        spec (GridSpec): Shared sampling.
        factors (Tuple[ComplexField, ...]): Factor fields, all in one space.
        mask (Optional[RealField]): When given, every factor must vanish outside it.
    """

    spec: GridSpec
    factors: Tuple[ComplexField, ...]
    mask: Optional[RealField] = None

    def __post_init__(self) -> None:
        """Check grids, spaces and mask support.

        Raises:
            ValidationError: If a factor is on another grid or space, or leaks outside the mask.
        """
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        spaces = {f.space for f in factors}
        if len(spaces) > 1:
            raise ValidationError("factors must share one space")
        for index, factor in enumerate(factors):
            if factor.spec != self.spec:
                raise ValidationError(f"factor {index} is on {factor.spec}, expected {self.spec}")
            if self.mask is not None and np.any(factor.values[self.mask.values == 0.0] != 0.0):
                raise ValidationError(f"factor {index} is nonzero outside the mask")

    def __len__(self) -> int:
        """Number of factors."""
        return len(self.factors)

    def __iter__(self) -> Iterator[ComplexField]:
        """Iterate over the factor fields in order."""
        return iter(self.factors)

    def stack(self) -> ComplexArray:
        """Factor samples stacked along a leading axis.

        Returns:
            ComplexArray: Array of shape (J, n, n).
        """
        if not self.factors:
            return np.zeros((0, self.spec.n, self.spec.n), dtype=np.complex128)
        return np.stack([f.values for f in self.factors])

    def diagonal(self) -> npt.NDArray[np.float64]:
        """The weight on the diagonal, w(v, v) = Σ_j |v_j(v)|².

        Returns:
            npt.NDArray[np.float64]: n x n array.
        """
        return np.asarray(np.sum(np.abs(self.stack()) ** 2, axis=0), dtype=np.float64)


def _check_pair(f: ComplexField, g: ComplexField) -> None:
    if f.spec != g.spec:
        raise ValidationError(f"grid mismatch: {f.spec} vs {g.spec}")
    if f.space is not g.space:
        raise ValidationError(f"space mismatch: {f.space.value} vs {g.space.value}")


def xcorr_arrays(f: npt.NDArray[Any], g: npt.NDArray[Any], spec: GridSpec, space: Space) -> ComplexArray:
    """Unweighted cross-correlation of raw arrays through the dual space.

    Args:
        f (npt.NDArray[Any]): First samples (conjugated), n x n or stacked (J, n, n).
        g (npt.NDArray[Any]): Second samples, same shape as f.
        spec (GridSpec): Sampling.
        space (Space): Space the samples live in.

    Returns:
        ComplexArray: Correlation samples in the same space and shape.
    """
    f_dual = to_dual_array(f, spec, space)
    g_dual = to_dual_array(g, spec, space)
    return to_dual_array(np.conj(f_dual) * g_dual, spec, space.dual())


def xcorr_spectral(f: ComplexField, g: ComplexField) -> ComplexField:
    """Cross-correlation ``f ⋆ g`` via the convolution theorem.

    For Fourier-space inputs this is ``F(conj(F⁻¹ f) · F⁻¹ g)``; real-space inputs
    go through the forward transform instead.

    Args:
        f (ComplexField): First field (conjugated).
        g (ComplexField): Second field.

    Returns:
        ComplexField: Correlation in the inputs' space, lag 0 at the lattice origin.
    """
    _check_pair(f, g)
    return f.with_values(xcorr_arrays(f.values, g.values, f.spec, f.space))


def wcc_factorized(f: ComplexField, g: ComplexField, k: FactorList) -> ComplexField:
    """Weighted cross-correlation for a factorized weight, Σ_j (f v_j) ⋆ (g v_j).

    Args:
        f (ComplexField): First field (conjugated).
        g (ComplexField): Second field.
        k (FactorList): Factors of the weight.

    Returns:
        ComplexField: Weighted correlation; the zero field for an empty factor list.

    Raises:
        ValidationError: If the factors are on another grid or space.
    """
    _check_pair(f, g)
    if k.spec != f.spec:
        raise ValidationError(f"factor grid {k.spec} does not match field grid {f.spec}")
    total = np.zeros_like(f.values)
    for factor in k:
        if factor.space is not f.space:
            raise ValidationError("factors and fields must share one space")
        total = total + xcorr_arrays(f.values * factor.values, g.values * factor.values, f.spec, f.space)
    return f.with_values(total)


def wcc_direct(f: ComplexField, g: ComplexField, w: WeightMatrix) -> ComplexField:
    """Direct O(n⁴) weighted cross-correlation, used as an oracle.

    Args:
        f (ComplexField): First field (conjugated).
        g (ComplexField): Second field.
        w (WeightMatrix): Explicit weight table.

    Returns:
        ComplexField: ``Σ_y conj(f(y)) g(x + y) w(x + y, y) · cell``.

    Raises:
        ValidationError: On grids above the oracle cap or mismatched inputs.
    """
    _check_pair(f, g)
    n = f.spec.n
    if n > ORACLE_MAX_N:
        raise ValidationError(f"wcc_direct is an oracle limited to {ORACLE_MAX_N}² grids, got {n}²")
    if w.spec != f.spec:
        raise ValidationError(f"weight grid {w.spec} does not match field grid {f.spec}")
    center = f.spec.center
    idx = np.arange(n)
    f_conj = np.conj(f.values)
    out = np.zeros((n, n), dtype=np.complex128)
    for p0 in range(n):
        rows = (p0 - center + idx) % n
        for p1 in range(n):
            cols = (p1 - center + idx) % n
            weights = w.entries[rows[:, None], cols[None, :], idx[:, None], idx[None, :]]
            out[p0, p1] = np.sum(f_conj * g.values[np.ix_(rows, cols)] * weights)
    return f.with_values(out * f.spec.cell_area(f.space))


def factor_list(spec: GridSpec, fields: Sequence[ComplexField], mask: Optional[RealField] = None) -> FactorList:
    """Build a FactorList from any sequence of fields.

    Args:
        spec (GridSpec): Shared sampling.
        fields (Sequence[ComplexField]): Factor fields.
        mask (Optional[RealField]): Optional support mask.

    Returns:
        FactorList: The factors as an immutable list.
    """
    return FactorList(spec, tuple(fields), mask)
