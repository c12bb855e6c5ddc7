import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epr_spdc import oracle
from epr_spdc.errors import DomainError
from epr_spdc.specfun import ei_complex, ei_difference, erf_complex, faddeeva, sinc

finite = st.floats(-5, 5, allow_nan=False)


def mp_erf(z):
    with mpmath.workdps(30):
        return complex(mpmath.erf(mpmath.mpc(z)))


@pytest.mark.parametrize(
    "z, expected",
    [
        (0.0, 0.0),
        (1.0, 0.8427007929497149),
        (1j, 1.6504257587975429j),
        (2j, 18.564802414575553j),
    ],
)
def test_erf_reference_values(z, expected):
    np.testing.assert_allclose(erf_complex(z), expected, rtol=1e-14, atol=1e-300)


def test_erf_schwarz_reflection_example():
    z = 0.3 + 0.7j
    assert erf_complex(np.conj(z)) == pytest.approx(np.conj(erf_complex(z)), rel=1e-15)


def test_erf_against_series_oracle(rng):
    z = rng.uniform(-4, 4, 1000) + 1j * rng.uniform(-4, 4, 1000)
    ref = oracle.erf_series_oracle(z)
    err = np.abs(erf_complex(z) - ref) / np.abs(ref)
    assert err.max() < 1e-12


def test_erf_far_field_against_mpmath(rng):
    # 6 < |z| <= 1e6 with representable results (|Im z| modest)
    r = 10 ** rng.uniform(np.log10(6), 6, 200)
    phi = rng.uniform(-np.pi / 4, np.pi / 4, 200)
    z = r * np.exp(1j * phi)
    z = z.real + 1j * np.clip(z.imag, -20, 20)
    ref = np.array([mp_erf(v) for v in z])
    np.testing.assert_allclose(erf_complex(z), ref, rtol=1e-10)


def test_crossover_regions():
    # both sides of every algorithm switch: series radius and continued-fraction radius
    radii = np.array([1.5 - 1e-9, 1.5 + 1e-9, 6 - 1e-9, 6 + 1e-9, 9.9])
    phi = np.linspace(0, 2 * np.pi, 17)
    z = (radii[:, None] * np.exp(1j * phi[None, :])).ravel()
    z = z[z.imag**2 - z.real**2 < 700]
    ref = np.array([mp_erf(v) for v in z])
    np.testing.assert_allclose(erf_complex(z), ref, rtol=1e-12)


def test_erf_rejects_non_finite():
    with pytest.raises(DomainError):
        erf_complex(np.nan)
    with pytest.raises(DomainError):
        erf_complex(complex(np.inf, 0))


def test_erf_vectorised_shape():
    z = np.zeros((3, 4), complex)
    assert erf_complex(z).shape == (3, 4)
    assert isinstance(erf_complex(0.5), complex)


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_erf_is_odd(x, y):
    z = complex(x, y)
    np.testing.assert_allclose(erf_complex(-z), -erf_complex(z), rtol=1e-12, atol=1e-300)


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_erf_schwarz_reflection(x, y):
    z = complex(x, y)
    np.testing.assert_allclose(erf_complex(np.conj(z)), np.conj(erf_complex(z)), rtol=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_erf_derivative(x, y):
    z, h = complex(x, y), 1e-5
    fd = (erf_complex(z + h) - erf_complex(z - h)) / (2 * h)
    exact = 2 / np.sqrt(np.pi) * np.exp(-z * z)
    assert abs(fd - exact) <= 1e-7 * max(1.0, abs(exact))


def test_faddeeva_matches_erfc_relation():
    z = np.array([0.5 + 0.5j, 3 + 2j, 7 + 1j])
    w = faddeeva(z)
    expected = np.array([complex(mpmath.exp(-mpmath.mpc(v) ** 2) * mpmath.erfc(-1j * mpmath.mpc(v)))
                         for v in z])
    np.testing.assert_allclose(w, expected, rtol=1e-12)


def test_faddeeva_lower_half_plane_rejected():
    with pytest.raises(DomainError):
        faddeeva(1 - 1j)


# ---------------------------------------------------------------------------
# Ei


@pytest.mark.parametrize(
    "z, expected",
    [
        (1.0, 1.8951178163559368),
        (1j, 0.3374039229009681 + 1j * (0.9460830703671830 + np.pi / 2)),
    ],
)
def test_ei_reference_values(z, expected):
    np.testing.assert_allclose(ei_complex(z), expected, rtol=1e-14)


def test_ei_branch_on_imaginary_axis():
    # Ei(ix) - conj(Ei(-ix)) = 2 pi i * 0 with the principal logarithm
    x = 2.5
    assert abs(ei_complex(1j * x) - np.conj(ei_complex(-1j * x))) < 1e-15


def test_ei_imaginary_axis_against_sici(rng):
    x = rng.uniform(0.01, 200, 1000) * rng.choice([-1, 1], 1000)
    ref = oracle.ei_imag_oracle(x)
    err = np.abs(ei_complex(1j * x) - ref) / np.abs(ref)
    assert err.max() < 1e-10


def test_ei_against_series_oracle(rng):
    r = rng.uniform(0.01, 30, 1000)
    z = r * np.exp(1j * rng.uniform(-np.pi, np.pi, 1000))
    ref = oracle.ei_series_oracle(z)
    err = np.abs(ei_complex(z) - ref) / np.abs(ref)
    assert err.max() < 1e-10


def test_ei_large_real_argument():
    assert ei_complex(60.0) == pytest.approx(float(mpmath.ei(60)), rel=1e-12)


def test_ei_singularity_raises():
    with pytest.raises(DomainError):
        ei_complex(0.0)
    with pytest.raises(DomainError):
        ei_complex(np.nan)


def test_ei_difference_identical_arguments():
    assert ei_difference(0.7, 0.7) == 0


def test_ei_difference_small_arguments():
    assert ei_difference(2e-12, 1e-12) == pytest.approx(np.log(2), abs=1e-11)


def test_ei_difference_against_contour_quadrature():
    ref = oracle.ei_difference_oracle(1.0, 2.0)
    assert abs(ei_difference(1.0, 2.0) - ref) < 1e-12


def test_ei_difference_against_oracle_random(rng):
    x1 = 10 ** rng.uniform(-8, 1.7, 200)
    x2 = x1 * rng.uniform(1.01, 5, 200)
    ref = oracle.ei_difference_oracle(x1, x2)
    assert np.max(np.abs(ei_difference(x1, x2) - ref)) < 1e-10


def test_ei_difference_matches_direct_difference(rng):
    x1 = rng.uniform(0.5, 30, 100)
    x2 = rng.uniform(0.5, 30, 100)
    direct = ei_complex(1j * x1) - ei_complex(1j * x2)
    np.testing.assert_allclose(ei_difference(x1, x2), direct, atol=1e-12)


def test_ei_difference_tiny_arguments_stay_finite():
    val = ei_difference(1e-300, 1e-200)
    assert np.isfinite(val)
    assert val.real == pytest.approx(-100 * np.log(10), rel=1e-14)


@pytest.mark.parametrize("bad", [(0.0, 1.0), (-1.0, 1.0), (np.inf, 1.0), (1.0, np.nan)])
def test_ei_difference_domain(bad):
    with pytest.raises(DomainError):
        ei_difference(*bad)


pos = st.floats(1e-9, 50, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(pos, pos, pos)
def test_ei_difference_telescopes(x1, x2, x3):
    lhs = ei_difference(x1, x2) + ei_difference(x2, x3)
    assert abs(lhs - ei_difference(x1, x3)) < 1e-10


@settings(max_examples=200, deadline=None)
@given(pos, pos)
def test_ei_difference_antisymmetric(x1, x2):
    assert abs(ei_difference(x1, x2) + ei_difference(x2, x1)) < 1e-12


# ---------------------------------------------------------------------------
# sinc


@pytest.mark.parametrize("x, expected", [(0.0, 1.0), (np.pi, 0.0), (1.0, 0.8414709848078965)])
def test_sinc_values(x, expected):
    assert sinc(x) == pytest.approx(expected, abs=1e-16)


def test_sinc_against_oracle(rng):
    x = rng.uniform(-100, 100, 1000)
    np.testing.assert_allclose(sinc(x), oracle.sinc_oracle(x), atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3))
def test_sinc_even_and_bounded(x):
    assert sinc(x) == sinc(-x)
    assert abs(sinc(x)) <= 1.0
