"""Complex-argument special functions used by the position-space amplitude.

Everything here is vectorised over numpy arrays; scalar input gives a scalar
back. Branch conventions:

* ``ei_complex`` is ``gamma + Log z + sum z^k/(k k!)`` with the principal
  logarithm, so ``Ei(ix) = Ci(x) + i(Si(x) + pi/2)`` for ``x > 0``. On the
  negative real axis the real (principal-value) number ``-E1(|x|)`` is
  returned; just above/below the cut the value jumps by ``+-i pi``.
* ``sinc`` is the unnormalised ``sin(x)/x``.
"""

from math import factorial

import numpy as np

from .errors import DomainError

__all__ = ["erf_complex", "ei_complex", "ei_difference", "sinc", "faddeeva"]

EULER_GAMMA = 0.57721566490153286061
_SQRT_PI = np.sqrt(np.pi)
_TWO_PI_HI = 6.283185307179586
_TWO_PI_LO = 2.4492935982947064e-16

# Crossovers were picked by scanning the max relative error against an
# mpmath reference (see tests/test_specfun.py::test_crossover_regions).
_ERF_SERIES_RADIUS = 1.5
_W_CF_RADIUS = 6.0
_W_CF_TERMS = 40
_EI_SERIES_RADIUS = 2.0
_EI_SECTOR_SERIES_RADIUS = 40.0
_EI_SECTOR = np.pi / 6


def _as_array(z, dtype=complex):
    arr = np.asarray(z, dtype=dtype)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    if scalar:
        return arr.item()
    return arr


def sinc(x):
    """Unnormalised sinc, ``sin(x)/x`` with ``sinc(0) = 1``."""
    x, scalar = _as_array(x, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(x == 0.0, 1.0, np.sin(x) / np.where(x == 0.0, 1.0, x))
    return _out(out, scalar)


# ---------------------------------------------------------------------------
# error function


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    """Error-free product: ``a*b == p + e`` exactly (Dekker)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _exp_neg_sq(z):
    """``exp(-z**2)`` with the phase carried in double-double.

    The naive product loses the phase ``-2xy`` once ``|z|`` is large, which
    ruins erf in the sectors where ``exp(-z**2)`` is not negligible.
    """
    x, y = z.real, z.imag
    re = (y - x) * (y + x)
    p, e = _two_prod(2.0 * x, y)
    n = np.rint(p / _TWO_PI_HI)
    h, l = _two_prod(n, _TWO_PI_HI)
    phase = -(((p - h) - l) - n * _TWO_PI_LO + e)
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.exp(re)
        return mag * np.cos(phase) + 1j * (mag * np.sin(phase))


def _weideman_coefficients(n_terms):
    m = 2 * n_terms
    k = np.arange(-m + 1, m)
    length = np.sqrt(n_terms / np.sqrt(2.0))
    t = length * np.tan(0.5 * k * np.pi / m)
    f = np.zeros(k.size + 1)
    f[1:] = np.exp(-t * t) * (length**2 + t * t)
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return np.flipud(a[1 : n_terms + 1]), length


_WEIDEMAN_A, _WEIDEMAN_L = _weideman_coefficients(40)


def _faddeeva_weideman(z):
    lz = _WEIDEMAN_L - 1j * z
    zz = (_WEIDEMAN_L + 1j * z) / lz
    p = np.polyval(_WEIDEMAN_A, zz)
    return 2.0 * p / (lz * lz) + (1.0 / _SQRT_PI) / lz


def _faddeeva_cf(z):
    # Laplace continued fraction, evaluated bottom-up.
    t = z.copy()
    for k in range(_W_CF_TERMS, 0, -1):
        t = z - (0.5 * k) / t
    return 1j / (_SQRT_PI * t)


def faddeeva(z):
    """Faddeeva function ``w(z) = exp(-z^2) erfc(-iz)`` for ``Im z >= 0``."""
    z, scalar = _as_array(z)
    if np.any(z.imag < 0):
        raise DomainError("faddeeva is implemented for Im(z) >= 0 only")
    out = np.empty_like(z)
    far = np.abs(z) >= _W_CF_RADIUS
    out[far] = _faddeeva_cf(z[far])
    out[~far] = _faddeeva_weideman(z[~far])
    return _out(out, scalar)


_ERF_COEFFS = np.array(
    [(-1) ** n / (factorial(n) * (2 * n + 1)) for n in range(40)][::-1]
)


def _erf_maclaurin(z):
    return (2.0 / _SQRT_PI) * z * np.polyval(_ERF_COEFFS, z * z)


def erf_complex(z):
    """Error function of a complex argument.

    Maclaurin series near the origin, ``1 - exp(-z^2) w(iz)`` elsewhere, with
    ``w`` from Weideman's rational approximation (``|iz| < 6``) or the Laplace
    continued fraction. Accuracy is ~1e-13 relative for ``|z| <= 10`` and
    better than 1e-10 out to ``|z| = 1e6`` as long as the result is
    representable, i.e. ``Im(z)^2 - Re(z)^2 < ~709``.
    """
    z, scalar = _as_array(z)
    if not np.all(np.isfinite(z)):
        raise DomainError("erf_complex requires a finite argument")
    flip = z.real < 0
    zz = np.where(flip, -z, z)
    out = np.empty_like(zz)
    small = np.abs(zz) < _ERF_SERIES_RADIUS
    out[small] = _erf_maclaurin(zz[small])
    big = ~small
    if np.any(big):
        zb = zz[big]
        with np.errstate(over="ignore", invalid="ignore"):
            out[big] = 1.0 - _exp_neg_sq(zb) * faddeeva(1j * zb)
    out = np.where(flip, -out, out)
    return _out(out, scalar)


# ---------------------------------------------------------------------------
# exponential integral

_EI_TERMS = 170
_EI_COEFFS = np.array(
    [0.0] + [1.0 / (k * float(factorial(k))) for k in range(1, _EI_TERMS)]
)[::-1]


def _ei_series(z):
    logz = np.log(z)
    on_cut = (z.imag == 0) & (z.real < 0)
    logz = np.where(on_cut, np.log(np.abs(z)) + 0j, logz)
    return EULER_GAMMA + logz + np.polyval(_EI_COEFFS, z)


def _e1_cf(z, tol=1e-16, max_iter=20000):
    """E1 by the even continued fraction (modified Lentz), ``|arg z| < pi``."""
    tiny = 1e-300
    f = z + 1.0
    f = np.where(f == 0, tiny, f)
    c = f.copy()
    d = np.zeros_like(z)
    active = np.ones(z.shape, bool)
    for k in range(1, max_iter):
        a = -float(k * k)
        b = z + (2 * k + 1)
        d_new = b + a * d
        d_new = np.where(d_new == 0, tiny, d_new)
        d_new = 1.0 / d_new
        c_new = b + a / c
        c_new = np.where(c_new == 0, tiny, c_new)
        delta = c_new * d_new
        f = np.where(active, f * delta, f)
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        active &= np.abs(delta - 1.0) > tol
        if not active.any():
            break
    return np.exp(-z) / f


def _ei_asymptotic(z):
    total = np.ones_like(z)
    term = np.ones_like(z)
    n_max = int(np.ceil(np.abs(z).max())) + 1
    done = np.zeros(z.shape, bool)
    for k in range(1, n_max):
        nxt = term * (k / z)
        done |= np.abs(nxt) >= np.abs(term)
        term = np.where(done, term, nxt)
        total = total + np.where(done, 0.0, nxt)
        done |= np.abs(nxt) < 1e-18 * np.abs(total)
        if done.all():
            break
    return np.exp(z) / z * total + 1j * np.pi * np.sign(z.imag)


def ei_complex(z):
    """Exponential integral Ei on the principal branch (see module docstring)."""
    z, scalar = _as_array(z)
    if not np.all(np.isfinite(z)):
        raise DomainError("ei_complex requires a finite argument")
    if np.any(z == 0):
        raise DomainError("ei_complex has a logarithmic singularity at z = 0")
    r = np.abs(z)
    arg = np.abs(np.angle(z))
    in_sector = arg <= _EI_SECTOR
    use_series = (r <= _EI_SERIES_RADIUS) | (in_sector & (r < _EI_SECTOR_SERIES_RADIUS))
    use_asym = in_sector & (r >= _EI_SECTOR_SERIES_RADIUS)
    use_cf = ~(use_series | use_asym)

    out = np.empty_like(z)
    if use_series.any():
        out[use_series] = _ei_series(z[use_series])
    if use_asym.any():
        out[use_asym] = _ei_asymptotic(z[use_asym])
    if use_cf.any():
        zc = z[use_cf]
        out[use_cf] = -_e1_cf(-zc) + 1j * np.pi * np.sign(zc.imag)
    return _out(out, scalar)


_EID_TERMS = 40
_EID_K = np.arange(1, _EID_TERMS)
_EID_COEFFS = (1j**_EID_K) / (_EID_K * np.array([float(factorial(k)) for k in _EID_K]))


def ei_difference(x1, x2):
    """``Ei(i*x1) - Ei(i*x2)`` for positive reals, stable as both go to 0.

    The constant and logarithmic parts are combined into ``log(x1/x2)`` before
    the power series is summed, so arguments down to the float minimum work.
    """
    x1, s1 = _as_array(x1, float)
    x2, s2 = _as_array(x2, float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    if np.any(~(x1 > 0)) or np.any(~(x2 > 0)) or not np.all(np.isfinite(x1 + x2)):
        raise DomainError("ei_difference needs finite positive arguments")
    out = np.empty(x1.shape, complex)
    small = (x1 <= _EI_SERIES_RADIUS) & (x2 <= _EI_SERIES_RADIUS)
    if small.any():
        a, b = x1[small], x2[small]
        # x1^k - x2^k for k = 1..K, columnwise
        pa = a[:, None] ** _EID_K
        pb = b[:, None] ** _EID_K
        out[small] = np.log(a / b) + ((pa - pb) * _EID_COEFFS).sum(axis=1)
    big = ~small
    if big.any():
        out[big] = ei_complex(1j * x1[big]) - ei_complex(1j * x2[big])
    return _out(out, s1 and s2)
