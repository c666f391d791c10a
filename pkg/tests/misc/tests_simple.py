import numpy as np

from exit_wave import (GridSpec, OpticalParams, ReconstructionVariables, SolverConfig, SyntheticWaveSpec,
                       build_kernels, energy, initial_variables, make_synthetic_wave, minimize, simulate_series)
from exit_wave.forward import Atom, crop_wave

spec = GridSpec(32, 0.25)
p = OpticalParams(alpha_max_rad=0.05)
wave = SyntheticWaveSpec((Atom((0.03, -0.02), 0.8, 0.015, -0.1),), 1.0, spec.extent_nm)
psi_large = make_synthetic_wave(spec.doubled(), wave, p)

foci = (-10.0, -8.5, -7.0)
drifts = ((0.0, 0.0), (0.0078125, 0.0), (0.015625, 0.0))
series = simulate_series(psi_large, foci, drifts, p, n_focal=3)
kernels = build_kernels(spec, foci, p, n_focal=3)
assert len(series) == 3
assert all(np.min(image.values) >= 0.0 for image in series.images)

truth = ReconstructionVariables(crop_wave(psi_large, spec, p), drifts)
assert energy(truth, series, kernels).data_term < 1e-20

start = initial_variables(series)
assert start.translations_nm[0] == (0.0, 0.0)
final, records = minimize(start, series, kernels, SolverConfig(max_iters=10))
assert records[-1].energy.total <= records[0].energy.total
assert final.translations_nm[0] == (0.0, 0.0)

print("passed simple test")
