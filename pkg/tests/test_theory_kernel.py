import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseblock import theory_kernel as tk

T_VALUES = [0.5, 1.0, 2.0, 4.0]


def lagrange_moment(k):
    """Integer t-coefficients of mu_2k from a closed sum over Lagrange inversion."""
    n = 2 * k + 1
    coeffs = [Fraction(0)] * (k + 1)
    for j in range(k + 1):
        c = Fraction(math.comb(n, j) * math.comb(n + k - j - 1, k - j), n)
        # expand (t - 1)^j
        for i in range(j + 1):
            coeffs[i] += c * math.comb(j, i) * (-1) ** (j - i)
    assert all(c.denominator == 1 for c in coeffs)
    return tuple(int(c) for c in coeffs)


def narayana_moment(t, k):
    """MP moments via Narayana numbers: ratio t/2, scale 2."""
    lam = t / 2
    total = sum(math.comb(k, j) * math.comb(k, j - 1) / k * lam**j for j in range(1, k + 1))
    return 2**k * total


def contour_moments(t, k_max, M=512):
    edge = tk.ema_support(t)[-1][1]
    radius = 1.6 * edge
    theta = (np.arange(M // 2) + 0.5) * np.pi / (M // 2) / 2
    theta = np.concatenate([theta, np.pi - theta])  # upper half circle, off the axis
    z = radius * np.exp(1j * theta)
    g = tk.ema_resolvent(z, t)
    zz = np.concatenate([z, z.conj()])
    gg = np.concatenate([g, g.conj()])
    return [float(np.real(np.mean(zz ** (2 * k + 1) * gg))) for k in range(k_max + 1)]


# --------------------------------------------------------------------------
# resolvent


def test_large_z_asymptotic():
    z = 1j * 1e6
    for t in (0.1, 1.0, 10.0):
        g = tk.ema_resolvent(z, t)
        assert abs(g - 1 / z) < 10 * t / abs(z) ** 3


def test_residual_example():
    g = tk.ema_resolvent(2j, 1.0)
    assert abs(tk.ema_residual(g, 2j, 1.0)) < 1e-12
    assert g.imag <= 0


@settings(max_examples=60, deadline=None)
@given(st.floats(-8, 8), st.floats(1e-6, 5), st.sampled_from(T_VALUES + [0.3, 3.0]))
def test_residual_and_half_plane(x, y, t):
    z = complex(x, y)
    g = tk.ema_resolvent(z, t)
    assert abs(tk.ema_residual(g, z, t)) < 1e-12 * max(1.0, abs(g) ** 3, 1 / abs(z))
    assert g.imag <= 1e-12


def test_rejects_real_axis():
    with pytest.raises(ValueError):
        tk.ema_resolvent(1.0 + 0j, 1.0)


@pytest.mark.parametrize("t", T_VALUES)
def test_contour_moments_match_series(t):
    series = tk.ema_moments(10).evaluate(t)
    contour = contour_moments(t, 10)
    np.testing.assert_allclose(contour, series, rtol=1e-6)


# --------------------------------------------------------------------------
# density


def gauss_legendre(f, a, b, power=1, n=200, panels=16):
    """Composite Gauss-Legendre in phi after x = a + (b - a) sin(phi)^(2 power)."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(0, np.pi / 2, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    phi = ((hi - lo) * nodes / 2 + (hi + lo) / 2).ravel()
    w = ((hi - lo) / 2 * weights).ravel()
    s = np.sin(phi)
    x = a + (b - a) * s ** (2 * power)
    jac = (b - a) * 2 * power * s ** (2 * power - 1) * np.cos(phi)
    return float(np.sum(w * f(x) * jac))


def density_integral(t, power=0):
    f = lambda x: x**power * tk.ema_density(x, t)  # noqa: E731
    total = 0.0
    for a, b in tk.ema_support(t):
        if a < 0 < b:
            # split at the origin, where t = 1 has an integrable blow-up
            total += gauss_legendre(f, 0.0, b, 3) - gauss_legendre(f, 0.0, a, 3)
        else:
            total += gauss_legendre(f, a, b)
    return total


@pytest.mark.parametrize("t", T_VALUES)
def test_density_normalised(t):
    assert density_integral(t) + tk.ema_atom_mass(t) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("t", T_VALUES)
def test_density_second_moment(t):
    assert density_integral(t, 2) == pytest.approx(t, rel=1e-4)


@pytest.mark.parametrize("t", T_VALUES)
def test_density_symmetric_and_confined(t):
    x = np.linspace(0.01, 4 + 2 * math.sqrt(t), 400)
    np.testing.assert_allclose(tk.ema_density(x, t), tk.ema_density(-x, t), atol=1e-9)
    far = np.linspace(2 + 2 * math.sqrt(t) + 1, 30, 50)
    assert np.all(tk.ema_density(far, t) < 1e-6)


def test_support_shapes():
    assert len(tk.ema_support(0.5)) == 2
    lo, hi = tk.ema_support(0.5)[1]
    assert 0 < lo < hi
    assert len(tk.ema_support(2.0)) == 1
    assert tk.ema_atom_mass(0.5) == 0.5 and tk.ema_atom_mass(2.0) == 0.0
    assert tk.EmaParams(0.5).support == tk.ema_support(0.5)


def test_density_epsilon_range():
    with pytest.raises(ValueError):
        tk.ema_density(0.0, 1.0, epsilon=0.1)


def test_params_validation():
    for cls in (tk.EmaParams, tk.MpParams):
        with pytest.raises(ValueError):
            cls(0.0)


# --------------------------------------------------------------------------
# moment series


def test_low_moments():
    s = tk.ema_moments(4)
    assert s[0] == (1,)
    assert s[1] == (0, 1)
    assert s[2] == (0, 1, 2)
    assert s[4] == (0, 1, 12, 28, 14)
    np.testing.assert_array_equal(s.evaluate(0.0), [1, 0, 0, 0, 0])


def test_series_against_lagrange_inversion():
    s = tk.ema_moments(20)
    for k in range(1, 21):
        assert s[k] == lagrange_moment(k)


def test_series_catalan_leading():
    s = tk.ema_moments(30)
    for k in range(1, 31):
        assert s[k][-1] == math.comb(2 * k, k) // (k + 1)
        assert all(isinstance(c, int) and c >= 0 for c in s[k])


def test_series_json_maps():
    assert tk.ema_moments(2).as_json_maps() == [{"0": 1}, {"1": 1}, {"1": 1, "2": 2}]


def test_series_bounds():
    with pytest.raises(ValueError):
        tk.ema_moments(65)


def test_general_radii_reduce_to_equal_radii():
    Z, d, r = 6, 4, 3
    exact = tk.general_radii_moments(Z, d, [1] * r, 8)
    t = Fraction(r * Z, d)
    for k, poly in enumerate(tk.ema_moments(8).coefficients):
        assert exact[k] == sum(c * t**i for i, c in enumerate(poly))


def test_general_radii_first_orders():
    radii = [1, 2]
    exact = tk.general_radii_moments(1, 1, radii, 3)
    s1 = sum(R**4 for R in radii)
    s2 = sum(R**8 for R in radii)
    assert exact[1] == s1
    # hand expansion to order x^4: f2 = 2 f1 S1 + S2
    assert exact[2] == 2 * s1 * s1 + s2 == 835
    assert tk.general_radii_moments(3, 2, [1.5], 1)[1] == pytest.approx(1.5 * 1.5**4)


# --------------------------------------------------------------------------
# Marchenko-Pastur


def test_mp_edges():
    mp = tk.MpParams(2.0)
    assert mp.a == pytest.approx(0.0, abs=1e-15)
    assert mp.b == pytest.approx(8.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 3.0, 4.0])
def test_mp_masses(t):
    mp = tk.MpParams(t)
    a, b = mp.a, mp.b
    oracle = ((a + b) / 2 - math.sqrt(a * b)) / 4
    assert tk.mp_continuous_mass(mp) == pytest.approx(oracle, abs=1e-6)
    assert tk.mp_continuous_mass(mp) + tk.mp_atom_mass(mp) == pytest.approx(1.0, abs=1e-6)


def test_mp_named_examples():
    assert tk.mp_atom_mass(4.0) == 0.0
    assert tk.mp_atom_mass(1.0) == 0.5
    assert tk.mp_continuous_mass(1.0) == pytest.approx(0.5, abs=1e-6)
    assert tk.mp_density(-1.0, 4.0) == 0.0


def test_mp_first_moment_riemann():
    mp = tk.MpParams(4.0)
    x = np.linspace(mp.a, mp.b, 2_000_001)
    mid = (x[1:] + x[:-1]) / 2
    riemann = np.sum(mid * tk.mp_density(mid, mp)) * (x[1] - x[0])
    assert tk.mp_moments(mp, 1)[1] == pytest.approx(riemann, abs=1e-5)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 4.0])
def test_mp_moments_narayana(t):
    m = tk.mp_moments(t, 6)
    assert m[0] == 1.0
    for k in range(1, 7):
        assert m[k] == pytest.approx(narayana_moment(t, k), rel=1e-8)


def test_mp_small_t():
    assert tk.mp_moments(1e-6, 1)[1] == pytest.approx(0.0, abs=1e-5)


# --------------------------------------------------------------------------
# measure-ratio factors

C = tk.RatioCase


def test_ratio_examples():
    assert tk.measure_ratio_factor(C.VECTOR_SPHERE, 4, [2]) == pytest.approx(2 / 3)
    assert tk.measure_ratio_factor(C.MATRIX_FIXED, 2, [1]) == pytest.approx(math.gamma(1.5))
    assert tk.measure_ratio_factor(C.VECTOR_SPHERE, 10_000, [2]) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("d", [2, 4, 8])
def test_ratio_closed_forms(d):
    n = d * (d + 1) / 2
    f = tk.measure_ratio_factor
    assert f(C.VECTOR_SPHERE, d, [4]) == pytest.approx(d**4 / (d * (d + 2) * (d + 4) * (d + 6)))
    assert f(C.VECTOR_BALL, d, [4]) == pytest.approx(d**4 / ((d + 2) * (d + 4) * (d + 6) * (d + 8)))
    assert f(C.MATRIX_FIXED, d, [4]) == pytest.approx(d**4 / (4 * n * (n + 2)))
    assert f(C.MATRIX_BOUNDED, d, [4]) == pytest.approx(d**4 / (4 * (n + 2) * (n + 4)))
    assert f(C.VECTOR_SPHERE, d, [2, 4]) == pytest.approx(f(C.VECTOR_SPHERE, d, [2]) * f(C.VECTOR_SPHERE, d, [4]))


@pytest.mark.parametrize("case", list(C))
@pytest.mark.parametrize("ranks", [[2], [4], [2, 2, 4]])
def test_ratio_monotone_to_one(case, ranks):
    vals = [tk.measure_ratio_factor(case, d, ranks) for d in range(2, 2049)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] < 1 and vals[-1] == pytest.approx(1.0, abs=0.02)


def test_ratio_rejects_empty():
    with pytest.raises(ValueError):
        tk.measure_ratio_factor(C.VECTOR_BALL, 3, [])
