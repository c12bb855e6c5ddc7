"""Two-photon amplitude in momentum and position representation.

Vectors (transverse wavevectors or positions) are passed as ``(x, y)`` pairs
whose components are broadcastable numpy arrays. Amplitudes are not
normalised; only ratios and normalised densities are meaningful.

Fourier convention (fixed by comparison with a direct DFT, see
``oracle.dft_transform_oracle``)::

    psi_RS(R, S) = (2 pi)^-4  Int psi_QP(Q, P) exp(i (Q.R + P.S)) d^2Q d^2P

which is consistent because ``Q.R + P.S = q1.rho1 + q2.rho2``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import crystal as _crystal
from .errors import PreconditionError
from .specfun import ei_difference, erf_complex, sinc

MIN_WAIST_MM = 0.05
MIN_GAP_MM = 1e-7
MAX_ABS_NU = 0.1
M2_MODES = ("rayleigh", "waist")


class NarrowWaistWarning(UserWarning):
    """Pump waist below the range where the separable amplitude is accurate."""


def _vec(v):
    x, y = v
    return np.asarray(x, float), np.asarray(y, float)


@dataclass(frozen=True)
class PumpBeam:
    """Gaussian pump. ``lambda_p`` in nm, ``w0`` and ``z_c`` in mm.

    ``m2_mode`` selects how the beam-quality factor enters ``a(z)``:

    * ``"rayleigh"``: ``w0_eff^2 = w0^2 / M^2`` (Rayleigh range shrinks by
      ``M^2`` at the measured waist),
    * ``"waist"``: ``w0_eff^2 = w0^2 * M^2``.
    """

    lambda_p: float
    w0: float
    z_c: float
    m2: float = 1.0
    amplitude: float = 1.0
    m2_mode: str = "rayleigh"

    def __post_init__(self):
        if not self.w0 > 0:
            raise ValueError(f"w0 must be positive, got {self.w0}")
        if not self.m2 >= 1:
            raise ValueError(f"m2 must be >= 1, got {self.m2}")
        if not self.lambda_p > 0:
            raise ValueError(f"lambda_p must be positive, got {self.lambda_p}")
        if self.m2_mode not in M2_MODES:
            raise ValueError(f"m2_mode must be one of {M2_MODES}")

    @property
    def k_v(self):
        return _crystal.vacuum_wavenumber(self.lambda_p)

    @property
    def w0_eff_sq(self):
        if self.m2_mode == "rayleigh":
            return self.w0**2 / self.m2
        return self.w0**2 * self.m2

    @property
    def in_validity_regime(self):
        """True when the waist is wide enough for the separable amplitude."""
        return self.w0 >= MIN_WAIST_MM

    def a(self, z):
        """Complex beam parameter ``z - z_c - i k w0_eff^2 / 2`` (mm)."""
        return np.asarray(z, float) - self.z_c - 0.5j * self.k_v * self.w0_eff_sq


def pump_spectrum(beam, Q, z):
    """Angular spectrum ``A exp(i k z) exp(-i a(z) Q^2 / 2k)`` of the pump."""
    qx, qy = _vec(Q)
    k = beam.k_v
    return (
        beam.amplitude
        * np.exp(1j * k * np.asarray(z, float))
        * np.exp(-1j * beam.a(z) * (qx * qx + qy * qy) / (2 * k))
    )


@dataclass(frozen=True)
class MomentumPoint:
    """Sum/weighted-difference wavevectors ``Q = q1 + q2``,
    ``P = (1 - nu) q1 - (1 + nu) q2``."""

    Q: tuple
    P: tuple
    nu: float = 0.0

    def __post_init__(self):
        _check_nu(self.nu)

    @classmethod
    def from_single(cls, q1, q2, nu=0.0):
        q1x, q1y = _vec(q1)
        q2x, q2y = _vec(q2)
        Q = (q1x + q2x, q1y + q2y)
        P = ((1 - nu) * q1x - (1 + nu) * q2x, (1 - nu) * q1y - (1 + nu) * q2y)
        return cls(Q, P, nu)

    def to_single(self):
        (Qx, Qy), (Px, Py), nu = _vec(self.Q), _vec(self.P), self.nu
        q1 = (0.5 * ((1 + nu) * Qx + Px), 0.5 * ((1 + nu) * Qy + Py))
        q2 = (0.5 * ((1 - nu) * Qx - Px), 0.5 * ((1 - nu) * Qy - Py))
        return q1, q2


@dataclass(frozen=True)
class PositionPoint:
    """``R = [(1 + nu) rho1 + (1 - nu) rho2] / 2`` and ``S = (rho1 - rho2) / 2``."""

    R: tuple
    S: tuple
    z: float
    nu: float = 0.0

    def __post_init__(self):
        _check_nu(self.nu)

    @classmethod
    def from_single(cls, rho1, rho2, z, nu=0.0):
        r1x, r1y = _vec(rho1)
        r2x, r2y = _vec(rho2)
        R = (
            0.5 * ((1 + nu) * r1x + (1 - nu) * r2x),
            0.5 * ((1 + nu) * r1y + (1 - nu) * r2y),
        )
        S = (0.5 * (r1x - r2x), 0.5 * (r1y - r2y))
        return cls(R, S, z, nu)

    def to_single(self):
        (Rx, Ry), (Sx, Sy), nu = _vec(self.R), _vec(self.S), self.nu
        rho1 = (Rx + (1 - nu) * Sx, Ry + (1 - nu) * Sy)
        rho2 = (Rx - (1 + nu) * Sx, Ry - (1 + nu) * Sy)
        return rho1, rho2


def _check_nu(nu):
    if not abs(nu) <= MAX_ABS_NU:
        raise ValueError(f"|nu| must be <= {MAX_ABS_NU} (quasi-degenerate), got {nu}")


def _erf_window(rx, c, lt):
    """``[erf(rx/c) - erf((rx - 2 lt)/c)] / (2 lt)``, finite as ``lt -> 0``.

    Written around the midpoint ``m = (rx - lt)/c`` with half-width
    ``h = lt/c``; a Taylor expansion in ``h`` replaces the difference where
    it would cancel.
    """
    m = (rx - lt) / c
    h = lt / c
    out = np.empty(np.broadcast(m, h).shape, complex)
    m, h = np.broadcast_arrays(m, h)
    small = np.abs(h) * (1.0 + np.abs(m)) < 1e-3
    if np.any(~small):
        mb, hb = m[~small], h[~small]
        out[~small] = (erf_complex(mb + hb) - erf_complex(mb - hb)) / (2.0 * lt)
    if np.any(small):
        ms, hs = m[small], h[small]
        m2 = ms * ms
        d1 = (2.0 / np.sqrt(np.pi)) * np.exp(-m2)
        series = (
            1.0
            + hs * hs * (4 * m2 - 2) / 6.0
            + hs**4 * (16 * m2 * m2 - 48 * m2 + 12) / 120.0
        )
        cs = np.broadcast_to(c, m.shape)[small]
        out[small] = d1 * series / cs
    return out


@dataclass(frozen=True)
class BiphotonField:
    """Amplitude of the down-converted pair for a crystal, pump and detuning.

    ``walk_off`` and ``beta2`` default to the values derived from ``crystal``;
    overriding them gives the thin-crystal and no-walk-off limits.
    """

    crystal: _crystal.CrystalParams
    beam: PumpBeam
    nu: float = 0.0
    walk_off: float = None
    beta2: float = None
    lt: float = field(init=False, repr=False)
    beta_sq: float = field(init=False, repr=False)

    def __post_init__(self):
        _check_nu(self.nu)
        if abs(self.crystal.lambda_pump_nm - self.beam.lambda_p) > 1e-9:
            raise ValueError("crystal and pump beam disagree on the pump wavelength")
        lt = _crystal.walk_off_length(self.crystal) if self.walk_off is None else self.walk_off
        b2 = _crystal.beta_sq(self.crystal) if self.beta2 is None else self.beta2
        if lt < 0 or b2 < 0:
            raise ValueError("walk-off length and beta^2 must be non-negative")
        object.__setattr__(self, "lt", float(lt))
        object.__setattr__(self, "beta_sq", float(b2))

    @property
    def k_v(self):
        return self.beam.k_v

    @property
    def L(self):
        return self.crystal.L

    @property
    def L_prime(self):
        return _crystal.l_prime(self.crystal)

    def b1(self, z):
        return _crystal.b1(self.crystal, self.beam, z, beta2=self.beta_sq)

    def b2(self, z):
        return _crystal.b2(self.crystal, z, beta2=self.beta_sq)

    def _global(self, z):
        return self.beam.amplitude * np.exp(1j * self.k_v * z)

    def _require_after_face(self, z, strict):
        gap = z - self.L
        if strict and gap < MIN_GAP_MM:
            raise PreconditionError(
                f"position amplitude needs z - L >= {MIN_GAP_MM} mm, got z - L = {gap:.3g} mm"
            )
        if not strict and gap < 0:
            raise PreconditionError(f"amplitude needs z >= L, got z={z}, L={self.L}")

    # -- momentum representation --------------------------------------------

    def q_factor(self, Q, z):
        """``Q``-dependent part of the separable amplitude (carries ``A e^{ikz}``)."""
        qx, qy = _vec(Q)
        return (
            self._global(z)
            * sinc(self.lt * qx)
            * np.exp(-1j * self.lt * qx)
            * np.exp(-1j * self.b1(z) * (qx * qx + qy * qy))
        )

    def p_factor(self, P, z):
        """``P``-dependent part of the separable amplitude."""
        px, py = _vec(P)
        p2 = px * px + py * py
        return sinc(self.beta_sq * p2) * np.exp(-1j * self.b2(z) * p2)

    def amplitude_QP(self, Q, P, z, separable=True):
        self._require_after_face(z, strict=False)
        if separable:
            if not self.beam.in_validity_regime:
                warnings.warn(
                    f"w0 = {self.beam.w0} mm is below {MIN_WAIST_MM} mm; the separable "
                    "amplitude is outside its accuracy range",
                    NarrowWaistWarning,
                    stacklevel=3,
                )
            return self.q_factor(Q, z) * self.p_factor(P, z)
        qx, qy = _vec(Q)
        px, py = _vec(P)
        q2, p2 = qx * qx + qy * qy, px * px + py * py
        return (
            self._global(z)
            * sinc(self.lt * qx - self.beta_sq * p2)
            * np.exp(-1j * self.lt * qx)
            * np.exp(-1j * self.b1(z) * q2)
            * np.exp(-1j * self.b2(z) * p2)
        )

    # -- position representation --------------------------------------------

    def r_factor(self, R, z):
        """Fourier transform of ``q_factor`` over ``Q`` (includes ``(2 pi)^-2``)."""
        rx, ry = _vec(R)
        b1 = self.b1(z)
        root = np.sqrt(1j * b1)  # principal branch, Re >= 0 since Im b1 < 0
        c = 2.0 * root
        window = _erf_window(rx, c, self.lt)
        return (
            self._global(z)
            * (np.pi ** 1.5 / root)
            * np.exp(-ry * ry / (4j * b1))
            * window
            / (4 * np.pi**2)
        )

    def s_factor(self, S, z):
        """Fourier transform of ``p_factor`` over ``P`` (includes ``(2 pi)^-2``)."""
        sx, sy = _vec(S)
        s2 = np.asarray(sx * sx + sy * sy, float)
        gap, gap_prime = z - self.L, z - self.L_prime
        log_ratio = np.log(gap_prime / gap)
        if self.beta_sq == 0.0:
            # thin-crystal limit: plain Fresnel kernel of exp(-i b2 P^2)
            b2 = self.b2(z)
            return np.pi / (1j * b2) * np.exp(1j * s2 / (4 * b2)) / (4 * np.pi**2)
        diff = np.full(s2.shape, log_ratio, complex)
        nz = s2 > 0
        if np.any(nz):
            u_near = self.k_v * s2[nz] / (2.0 * gap)
            u_far = self.k_v * s2[nz] / (2.0 * gap_prime)
            diff[nz] = ei_difference(u_near, u_far)
        return np.pi / (2j * self.beta_sq) * diff / (4 * np.pi**2)

    def amplitude_RS(self, R, S, z):
        self._require_after_face(z, strict=True)
        return self.r_factor(R, z) * self.s_factor(S, z)

    def amplitude_position(self, rho1, rho2, z):
        pt = PositionPoint.from_single(rho1, rho2, z, self.nu)
        return self.amplitude_RS(pt.R, pt.S, z)

    def amplitude_momentum(self, q1, q2, z, separable=True):
        pt = MomentumPoint.from_single(q1, q2, self.nu)
        return self.amplitude_QP(pt.Q, pt.P, z, separable=separable)


def psi_QP_full(field, q1, q2, z):
    """Amplitude with the coupled phase-matching sinc ``sinc(l_t Q_x - beta^2 P^2)``."""
    return field.amplitude_momentum(q1, q2, z, separable=False)


def psi_QP(field, q1, q2, z):
    """Separable amplitude ``sinc(l_t Q_x) ... sinc(beta^2 P^2) ...``."""
    return field.amplitude_momentum(q1, q2, z, separable=True)


def psi_RS(field, R, S, z):
    """Closed-form position amplitude in centroid/half-separation coordinates."""
    return field.amplitude_RS(R, S, z)


def psi_position(field, rho1, rho2, z):
    """Position amplitude at detector coordinates ``rho1``, ``rho2``."""
    return field.amplitude_position(rho1, rho2, z)


def separability_error(field, z, n=31, reach=3.0):
    """Relative L2 distance between ``psi_QP`` and ``psi_QP_full``.

    Both are sampled on an ``n^4`` grid of ``(q1, q2)`` restricted to
    ``|q1|, |q2| <= reach / w0``.
    """
    lim = reach / field.beam.w0
    q = np.linspace(-lim, lim, n)
    a, b, c, d = np.meshgrid(q, q, q, q, indexing="ij")
    edge = lim**2 * (1 + 1e-12)  # keep grid points that sit on the circle
    inside = (a**2 + b**2 <= edge) & (c**2 + d**2 <= edge)
    q1 = (a[inside], b[inside])
    q2 = (c[inside], d[inside])
    sep = psi_QP(field, q1, q2, z)
    full = psi_QP_full(field, q1, q2, z)
    return float(np.linalg.norm(sep - full) / np.linalg.norm(full))


def nu_from_wavelengths(lambda1_nm, lambda2_nm):
    """Detuning with ``omega_{1,2} = (1 +- nu) omega_p / 2``."""
    f1, f2 = 1.0 / lambda1_nm, 1.0 / lambda2_nm
    return (f1 - f2) / (f1 + f2)


def bbo_field(beam, L=5.0, nu=0.0, **kwargs):
    """Convenience constructor for the default BBO crystal."""
    params = _crystal.CrystalParams.from_sellmeier(_crystal.BBO, L, beam.lambda_p)
    return BiphotonField(params, beam, nu, **kwargs)
