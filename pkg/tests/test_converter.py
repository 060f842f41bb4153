import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.stats import norm

from hermit.converter import (
    AdcModel,
    bussgang_characterize,
    convert,
    gain_control,
    midrise,
    optimal_step_size,
    quantizer_mse,
    transformed_variances,
)
from hermit.errors import ConfigurationError
from hermit.transform import Alphabet, AnalogTransform, build_transform, covariance

from conftest import crandn, random_channel


def quad_mse(step, q):
    """Oracle: integrate (Q(x) - x)^2 phi(x) piece by piece with adaptive quadrature."""
    n = 2**q
    edges = [-np.inf] + [(k - n / 2) * step for k in range(1, n)] + [np.inf]
    total = 0.0
    for k in range(n):
        c = (k - n / 2 + 0.5) * step
        val, _ = integrate.quad(lambda x: (c - x) ** 2 * norm.pdf(x), edges[k], edges[k + 1], epsabs=1e-14, epsrel=1e-12)
        total += val
    return total


def grid_step_oracle(q, num=100_000):
    """Brute-force grid search over the step using E[Q^2] - 2 E[xQ] + E[x^2]."""
    steps = np.linspace(1e-3, 4.0, num)
    n = 2**q
    k = np.arange(n)
    c = (k - n / 2 + 0.5)[None, :] * steps[:, None]
    lo = (k - n / 2)[None, :] * steps[:, None]
    hi = lo + steps[:, None]
    lo[:, 0], hi[:, -1] = -np.inf, np.inf
    p = norm.cdf(hi) - norm.cdf(lo)
    exq = np.sum(c * (norm.pdf(lo) - norm.pdf(hi)), axis=1)
    eqq = np.sum(c**2 * p, axis=1)
    return steps[np.argmin(eqq - 2 * exq + 1.0)]


class TestStepSize:
    def test_one_bit_closed_form(self):
        assert optimal_step_size(1) == pytest.approx(2 * np.sqrt(2 / np.pi), abs=1e-8)

    def test_four_bit_grid_oracle(self):
        assert optimal_step_size(4) == pytest.approx(grid_step_oracle(4), abs=1e-4)

    @pytest.mark.parametrize("q", [1, 2, 3, 4, 6])
    def test_perturbation_increases_mse(self, q):
        s = optimal_step_size(q)
        best = quad_mse(s, q)
        assert quad_mse(1.05 * s, q) > best
        assert quad_mse(0.95 * s, q) > best

    @pytest.mark.parametrize("q", [1, 2, 3, 5])
    def test_mse_against_quadrature(self, q):
        for step in (0.2, 0.7, 1.3):
            assert quantizer_mse(step, q) == pytest.approx(quad_mse(step, q), rel=1e-8)

    @pytest.mark.parametrize("q", [0, 17, 2.5])
    def test_out_of_range(self, q):
        with pytest.raises(ConfigurationError):
            optimal_step_size(q)

    def test_max_table(self):
        # classic MSE-optimal uniform steps for a unit-variance Gaussian
        table = {1: 1.596, 2: 0.9957, 3: 0.5860, 4: 0.3352, 5: 0.1881}
        for q, step in table.items():
            assert optimal_step_size(q) == pytest.approx(step, abs=5e-4)


class TestMidrise:
    def test_two_bit_examples(self):
        assert midrise(0.7, 2, 1.0) == 0.5
        assert midrise(2.7, 2, 1.0) == 1.5
        assert midrise(-2.7, 2, 1.0) == -1.5

    def test_one_bit(self):
        assert midrise(0.3, 1, 1.5958) == pytest.approx(0.7979)

    def test_level_set(self):
        x = np.linspace(-10, 10, 100_001)
        out = np.unique(midrise(x, 3, 0.5))
        np.testing.assert_allclose(out, 0.25 * np.arange(-7, 8, 2))

    def test_boundary_stays_in_range(self):
        # x exactly at step * 2^(q-1) must not leave the level set
        assert midrise(2.0, 2, 1.0) == 1.5

    @settings(max_examples=200)
    @given(st.floats(-50, 50), st.integers(1, 8), st.floats(0.01, 3))
    def test_symmetry_and_bounds(self, x, q, step):
        top = 0.5 * step * (2**q - 1)
        y = midrise(x, q, step)
        assert abs(y) <= top * (1 + 1e-12)
        if not np.isclose(x / step, np.round(x / step), atol=1e-9):
            assert midrise(-x, q, step) == pytest.approx(-y)

    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=50), st.integers(1, 6))
    def test_nondecreasing(self, xs, q):
        xs = np.sort(xs)
        assert np.all(np.diff(midrise(xs, q, 0.4)) >= 0)


class TestBussgang:
    def test_one_bit_gain(self):
        gamma, D = bussgang_characterize(1, optimal_step_size(1))
        assert gamma == pytest.approx(2 / np.pi, abs=1e-12)
        # Q^2 = step^2 / 4 = 2/pi, so D = 2/pi - 4/pi^2
        assert D == pytest.approx(2 / np.pi - 4 / np.pi**2, abs=1e-12)

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_against_quadrature(self, q):
        step = optimal_step_size(q)
        exq = integrate.quad(lambda x: midrise(x, q, step) * x * norm.pdf(x), -12, 12, limit=400, points=np.arange(-(2**(q-1)) + 1, 2**(q-1)) * step)[0]
        eqq = integrate.quad(lambda x: midrise(x, q, step) ** 2 * norm.pdf(x), -12, 12, limit=400, points=np.arange(-(2**(q-1)) + 1, 2**(q-1)) * step)[0]
        gamma, D = bussgang_characterize(q, step)
        assert gamma == pytest.approx(exq, rel=1e-8)
        assert D == pytest.approx(eqq - exq**2, rel=1e-7)

    def test_monte_carlo(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(1_000_000)
        step = optimal_step_size(3)
        qx = midrise(x, 3, step)
        gamma, D = bussgang_characterize(3, step)
        g_hat = np.mean(qx * x) / np.mean(x**2)
        assert g_hat == pytest.approx(gamma, rel=3e-3)
        assert np.mean((qx - g_hat * x) ** 2) == pytest.approx(D, rel=3e-2)

    def test_high_resolution_limit(self):
        gamma, D = bussgang_characterize(12, optimal_step_size(12))
        assert abs(gamma - 1) < 1e-3
        assert D < 1e-3

    def test_adc_model_invariants(self):
        adc = AdcModel.for_resolution(4, np.ones(3))
        assert adc.step > 0 and 0 < adc.bussgang_gain < 1 and adc.distortion_var >= 0
        with pytest.raises(ConfigurationError):
            AdcModel.for_resolution(4, np.array([1.0, 0.0]))


class TestGainControl:
    def test_identity(self):
        g = gain_control(AnalogTransform.identity(4), 2 * np.eye(4))
        np.testing.assert_allclose(g, 1.0)

    def test_diagonal_matches_dense(self, rng):
        for kind, AC in [("unconstrained", 0), ("phase", 8), ("quadrature", 16)]:
            ch = random_channel(rng, B=16, U=3)
            Cy = covariance(ch.H, ch.h_J, ch.Es, ch.Ej, ch.N0)
            T = build_transform(ch, 4, Alphabet(kind, AC))
            P = T.dense()
            dense = np.diag(P @ Cy @ P.conj().T).real
            np.testing.assert_allclose(transformed_variances(T, Cy), dense, rtol=1e-12)

    def test_unit_real_variance(self, rng):
        ch = random_channel(rng, B=8, U=2)
        Cy = covariance(ch.H, ch.h_J, ch.Es, ch.Ej, ch.N0)
        T = build_transform(ch, 4, Alphabet.phase(16))
        g = gain_control(T, Cy)
        n = 100_000
        y = ch.H @ crandn(rng, 2, n) + np.outer(ch.h_J, crandn(rng, n) * np.sqrt(ch.Ej)) + crandn(rng, 8, n) * np.sqrt(ch.N0)
        var = np.var((g[:, None] * T.apply(y)).real, axis=1)
        np.testing.assert_allclose(var, 1.0, rtol=0.02)


def _surrogate_input(rng, n=100_000, q=4):
    ch = random_channel(rng, B=8, U=2, rho_db=25)
    Cy = covariance(ch.H, ch.h_J, ch.Es, ch.Ej, ch.N0)
    T = build_transform(ch, 4, Alphabet.quadrature(16))
    adc = AdcModel.for_resolution(q, gain_control(T, Cy))
    y = ch.H @ crandn(rng, 2, n) + np.outer(ch.h_J, crandn(rng, n) * np.sqrt(ch.Ej)) + crandn(rng, 8, n) * np.sqrt(ch.N0)
    return T.apply(y), adc


class TestConvert:
    def test_high_resolution_transparent(self, rng):
        y_P, _ = _surrogate_input(rng, n=1000)
        adc = AdcModel.for_resolution(12, np.sqrt(2 / np.mean(np.abs(y_P) ** 2, axis=1)))
        r = convert(y_P, adc)
        assert np.linalg.norm(r - y_P) / np.linalg.norm(y_P) < 1e-2

    def test_vector_and_matrix_agree(self, rng):
        y_P, adc = _surrogate_input(rng, n=5)
        np.testing.assert_array_equal(convert(y_P, adc)[:, 2], convert(y_P[:, 2], adc))

    def test_levels(self, rng):
        y_P, adc = _surrogate_input(rng, n=2000)
        r = convert(y_P, adc)
        levels = adc.step * (np.arange(2**adc.resolution) - 2 ** (adc.resolution - 1) + 0.5)
        scaled = adc.gains[:, None] * r
        for part in (scaled.real, scaled.imag):
            assert np.all(np.min(np.abs(part.ravel()[:, None] - levels[None, :]), axis=1) < 1e-12)

    def test_bussgang_orthogonality_and_variance(self, rng):
        y_P, adc = _surrogate_input(rng, n=400_000)
        r = convert(y_P, adc)
        g = adc.gains[:, None]
        d = g * (r - adc.bussgang_gain * y_P)
        corr = np.abs(np.mean(d * y_P.conj(), axis=1)) / np.sqrt(
            np.mean(np.abs(d) ** 2, axis=1) * np.mean(np.abs(y_P) ** 2, axis=1)
        )
        assert np.all(corr < 0.01)
        ratio = np.mean(np.abs(d) ** 2, axis=1) / (2 * adc.distortion_var)
        assert np.all((ratio > 0.95) & (ratio < 1.05))
