import string
import unittest

import numpy as np

from hypothesis import given, settings, strategies as st

from exit_wave import ComplexField, GridSpec, OpticalParams, Space, spectral_transform, inverse_spectral_transform
from exit_wave.fields import inner_product, modulate, reflect
from exit_wave.metadata import dumps, format_value, loads, parse_value
from exit_wave.tcc import tcc_ishizuka_eval
from exit_wave.wcc import xcorr_spectral

SPECS = st.sampled_from([GridSpec(8, 0.1), GridSpec(16, 0.25), GridSpec(32, 0.4)])
SEEDS = st.integers(min_value=0, max_value=2 ** 32 - 1)
SHIFTS = st.tuples(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
FINITE = st.floats(allow_nan=False, allow_infinity=False)
WORDS = st.text(alphabet=string.ascii_letters + string.digits + "_-.:/", max_size=20)


def random_field(spec, seed, space):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((spec.n, spec.n)) + 1j * rng.standard_normal((spec.n, spec.n))
    return ComplexField(spec, values, space)


def in_aperture(p, rng, count):
    radius = p.aperture_radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)


class TestTransformsWithHypothesis(unittest.TestCase):
    """Transform pair and modulation identities on random fields."""

    @settings(deadline=None)
    @given(spec=SPECS, seed=SEEDS)
    def test_inverse_undoes_forward(self, spec, seed):
        f = random_field(spec, seed, Space.REAL)
        back = inverse_spectral_transform(spectral_transform(f))
        np.testing.assert_allclose(back.values, f.values, atol=1e-12 * np.max(np.abs(f.values)))

    @settings(deadline=None)
    @given(spec=SPECS, seed_f=SEEDS, seed_g=SEEDS)
    def test_inner_product_is_preserved(self, spec, seed_f, seed_g):
        f = random_field(spec, seed_f, Space.REAL)
        g = random_field(spec, seed_g, Space.REAL)
        real = inner_product(f, g)
        fourier = inner_product(spectral_transform(f), spectral_transform(g))
        self.assertLessEqual(abs(real - fourier), 1e-10 * max(abs(real), 1.0))

    @settings(deadline=None)
    @given(spec=SPECS, seed=SEEDS, s=SHIFTS, t=SHIFTS)
    def test_modulations_compose(self, spec, seed, s, t):
        f = random_field(spec, seed, Space.FOURIER)
        twice = modulate(modulate(f, s), t)
        once = modulate(f, (s[0] + t[0], s[1] + t[1]))
        np.testing.assert_allclose(twice.values, once.values, atol=1e-10 * np.max(np.abs(f.values)))

    @settings(deadline=None)
    @given(spec=SPECS, seed=SEEDS, rows=st.integers(-4, 4), cols=st.integers(-4, 4))
    def test_pixel_modulation_is_a_roll(self, spec, seed, rows, cols):
        f = random_field(spec, seed, Space.FOURIER)
        h = spec.pixel_size
        moved = inverse_spectral_transform(modulate(f, (rows * h, cols * h))).values
        rolled = np.roll(inverse_spectral_transform(f).values, (-rows, -cols), axis=(0, 1))
        np.testing.assert_allclose(moved, rolled, atol=1e-10 * np.max(np.abs(rolled)))


class TestCorrelationWithHypothesis(unittest.TestCase):
    @settings(deadline=None)
    @given(spec=SPECS, seed_f=SEEDS, seed_g=SEEDS, space=st.sampled_from([Space.REAL, Space.FOURIER]))
    def test_swapping_arguments_reflects_and_conjugates(self, spec, seed_f, seed_g, space):
        f = random_field(spec, seed_f, space)
        g = random_field(spec, seed_g, space)
        fg = xcorr_spectral(f, g).values
        gf = xcorr_spectral(g, f).values
        np.testing.assert_allclose(fg, np.conj(reflect(gf)), atol=1e-10 * np.max(np.abs(fg)))


class TestTccWithHypothesis(unittest.TestCase):
    @settings(deadline=None)
    @given(seed=SEEDS, z=st.floats(-20.0, 30.0), delta=st.floats(0.0, 5.0), alpha_conv=st.floats(0.0, 1e-3))
    def test_hermitian_and_bounded(self, seed, z, delta, alpha_conv):
        p = OpticalParams(alpha_max_rad=0.05, delta_nm=delta, alpha_conv_rad=alpha_conv)
        rng = np.random.default_rng(seed)
        v, w = in_aperture(p, rng, 16), in_aperture(p, rng, 16)
        t_vw = tcc_ishizuka_eval(v, w, z, p)
        t_wv = tcc_ishizuka_eval(w, v, z, p)
        np.testing.assert_allclose(t_vw, np.conj(t_wv), atol=1e-12)
        self.assertTrue(np.all(np.abs(t_vw) <= 1.0 + 1e-12))
        diagonal = tcc_ishizuka_eval(v, v, z, p)
        np.testing.assert_allclose(diagonal.imag, 0.0, atol=1e-12)
        self.assertTrue(np.all(diagonal.real > 0.0))


class TestMetadataWithHypothesis(unittest.TestCase):
    """Typed values survive format and parse."""

    @given(value=FINITE)
    def test_float(self, value):
        self.assertEqual(parse_value(format_value(value)), value)

    @given(value=st.integers())
    def test_integer(self, value):
        self.assertEqual(parse_value(format_value(value)), value)

    @given(value=st.booleans())
    def test_boolean(self, value):
        self.assertEqual(parse_value(format_value(value)), value)

    @given(value=st.lists(st.tuples(FINITE, FINITE), max_size=6).map(tuple))
    def test_vector_tuples(self, value):
        self.assertEqual(parse_value(format_value(value)), value)

    @given(value=st.complex_numbers(allow_nan=False, allow_infinity=False))
    def test_complex(self, value):
        self.assertEqual(parse_value(format_value(value)), value)

    @given(meta=st.dictionaries(st.text(alphabet=string.ascii_lowercase + "_", min_size=1, max_size=12),
                                st.one_of(WORDS, st.integers(), FINITE, st.none()), max_size=8))
    def test_documents(self, meta):
        self.assertEqual(loads(dumps(meta)), meta)


if __name__ == '__main__':
    unittest.main()
