"""Crystal dispersion, collinear type-I phase matching and derived lengths.

Units: lengths in mm, wavenumbers in 1/mm. Sellmeier formulas take the
wavelength in micrometres (that is how the coefficients are tabulated);
everything else takes nanometres.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, PhaseMatchError

COLLINEAR_TOL = 1e-9


def vacuum_wavenumber(lambda_nm):
    """``2 pi / lambda`` in 1/mm."""
    return 2.0 * np.pi / (lambda_nm * 1e-6)


@dataclass(frozen=True)
class Sellmeier:
    """Two-branch dispersion ``n^2 = A + B/(lambda^2 - C) - D lambda^2``.

    ``ordinary`` and ``extraordinary`` hold ``(A, B, C, D)`` with lambda in
    um. Setting ``B = C = D = 0`` gives a constant index ``sqrt(A)``.
    """

    ordinary: tuple
    extraordinary: tuple
    window_um: tuple = (0.2, 1.0)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "ordinary", tuple(float(c) for c in self.ordinary))
        object.__setattr__(
            self, "extraordinary", tuple(float(c) for c in self.extraordinary)
        )
        object.__setattr__(self, "window_um", tuple(float(w) for w in self.window_um))
        if len(self.ordinary) != 4 or len(self.extraordinary) != 4:
            raise ValueError("Sellmeier branches take exactly four coefficients")

    @staticmethod
    def _index(coeffs, lam):
        a, b, c, d = coeffs
        lam2 = lam * lam
        n2 = a + b / (lam2 - c) - d * lam2
        return np.sqrt(n2)

    def _check(self, lam):
        lo, hi = self.window_um
        lam = np.asarray(lam, float)
        if np.any(lam < lo) or np.any(lam > hi) or not np.all(np.isfinite(lam)):
            raise DomainError(
                f"wavelength {lam} um outside the {self.name} validity window {lo}-{hi} um"
            )


# Standard published beta-BBO coefficients (lambda in um).
BBO = Sellmeier(
    ordinary=(2.7359, 0.01878, 0.01822, 0.01354),
    extraordinary=(2.3753, 0.01224, 0.01667, 0.01516),
    window_um=(0.2, 1.0),
    name="BBO",
)


def constant_index(n_o, n_e=None, window_um=(0.1, 10.0)):
    """Dispersionless stub, handy for limits in tests."""
    n_e = n_o if n_e is None else n_e
    return Sellmeier((n_o**2, 0, 0, 0), (n_e**2, 0, 0, 0), window_um, "constant")


def index_ordinary(sellmeier, lambda_um):
    sellmeier._check(lambda_um)
    return Sellmeier._index(sellmeier.ordinary, lambda_um)


def index_extraordinary(sellmeier, lambda_um):
    sellmeier._check(lambda_um)
    return Sellmeier._index(sellmeier.extraordinary, lambda_um)


def index_extraordinary_angle(sellmeier, lambda_um, theta):
    """Index of the extraordinary wave at angle ``theta`` to the optic axis."""
    theta = np.asarray(theta, float)
    if np.any(theta < 0) or np.any(theta > np.pi / 2):
        raise DomainError("theta must lie in [0, pi/2]")
    n_o = index_ordinary(sellmeier, lambda_um)
    n_e = index_extraordinary(sellmeier, lambda_um)
    return (np.cos(theta) ** 2 / n_o**2 + np.sin(theta) ** 2 / n_e**2) ** -0.5


def solve_phase_match(sellmeier, lambda_pump_um):
    """Angle at which the extraordinary pump index equals the ordinary index
    of the degenerate down-converted light at ``2 * lambda_pump``."""
    target = index_ordinary(sellmeier, 2.0 * lambda_pump_um)

    def mismatch(theta):
        return index_extraordinary_angle(sellmeier, lambda_pump_um, theta) - target

    lo, hi = 0.0, np.pi / 2
    f_lo, f_hi = mismatch(lo), mismatch(hi)
    if f_hi == 0.0:
        return hi
    if f_lo == 0.0:
        return lo
    if f_lo * f_hi > 0:
        raise PhaseMatchError(
            f"{sellmeier.name}: no collinear type-I phase match at {lambda_pump_um} um"
        )
    theta = brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return theta


@dataclass(frozen=True)
class CrystalParams:
    """Geometry and indices of a negative uniaxial crystal (lengths in mm).

    ``theta`` may sit on either end of ``[0, pi/2]`` so that the vanishing
    walk-off limits can be expressed.
    """

    L: float
    theta: float
    n_o_pump: float
    n_e_pump: float
    eta_p: float
    n_bar_o: float
    mu_oo: float = 0.0
    lambda_pump_nm: float = field(default=355.0, compare=True)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"crystal length must be positive, got L={self.L}")
        if not 0.0 <= self.theta <= np.pi / 2:
            raise ValueError(f"theta={self.theta} outside [0, pi/2]")
        if not self.n_e_pump < self.n_o_pump:
            raise ValueError("crystal must be negative uniaxial (n_e < n_o)")
        if abs(self.n_bar_o - self.eta_p) >= COLLINEAR_TOL:
            raise ValueError(
                f"collinear phase match violated: |n_bar_o - eta_p| = "
                f"{abs(self.n_bar_o - self.eta_p):.3e}"
            )
        if abs(self.mu_oo) > COLLINEAR_TOL:
            raise ValueError("only collinear phase matching (mu_oo = 0) is supported")

    @classmethod
    def from_sellmeier(cls, sellmeier, L, lambda_pump_nm, theta=None):
        """Build the collinear configuration; ``theta`` defaults to the phase-match solve."""
        lam = lambda_pump_nm * 1e-3
        if theta is None:
            theta = solve_phase_match(sellmeier, lam)
        eta_p = float(index_extraordinary_angle(sellmeier, lam, theta))
        n_bar_o = float(index_ordinary(sellmeier, 2 * lam))
        return cls(
            L=float(L),
            theta=float(theta),
            n_o_pump=float(index_ordinary(sellmeier, lam)),
            n_e_pump=float(index_extraordinary(sellmeier, lam)),
            eta_p=eta_p,
            n_bar_o=n_bar_o,
            mu_oo=0.0,
            lambda_pump_nm=float(lambda_pump_nm),
        )

    @property
    def k_vacuum(self):
        return vacuum_wavenumber(self.lambda_pump_nm)

    @property
    def k_pump(self):
        """Pump wavenumber inside the crystal, ``eta_p * omega_p / c``."""
        return self.eta_p * self.k_vacuum


def walk_off_length(params):
    """Half of the transverse walk-off of the pump across the crystal, ``l_t``."""
    no2, ne2 = params.n_o_pump**2, params.n_e_pump**2
    s, c = np.sin(params.theta), np.cos(params.theta)
    return 0.5 * (no2 - ne2) * s * c / (no2 * s * s + ne2 * c * c) * params.L


def beta_sq(params, lambda_pump_nm=None):
    """``L / (4 k_p)`` in mm^2."""
    lam = params.lambda_pump_nm if lambda_pump_nm is None else lambda_pump_nm
    k_p = params.eta_p * vacuum_wavenumber(lam)
    return params.L / (4.0 * k_p)


def l_prime(params):
    """``(1 - 1/n_bar_o) L``, the second lower limit in the position amplitude."""
    return (1.0 - 1.0 / params.n_bar_o) * params.L


def b1(params, beam, z, beta2=None):
    """Complex Q^2 coefficient of the propagated amplitude at plane ``z`` (mm^2).

    ``beta2`` overrides ``beta_sq(params)``; it exists for thin-crystal limits.
    """
    k_v = vacuum_wavenumber(params.lambda_pump_nm)
    beta2 = beta_sq(params) if beta2 is None else beta2
    return beam.a(z) / (2.0 * k_v) - 2.0 * (params.n_bar_o - 1.0) * beta2


def b2(params, z, beta2=None):
    """Real P^2 coefficient of the propagated amplitude at plane ``z`` (mm^2)."""
    k_v = vacuum_wavenumber(params.lambda_pump_nm)
    beta2 = beta_sq(params) if beta2 is None else beta2
    return np.asarray(z, float) / (2.0 * k_v) - (2.0 * params.n_bar_o - 1.0) * beta2
