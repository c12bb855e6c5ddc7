"""Conditional one-photon densities and their standard deviations.

Position profiles sample ``|psi(rho1, rho2, z)|^2`` along one axis of
``rho1`` with the partner ``rho2`` held fixed; momentum profiles do the same
with ``q2`` fixed. The off-axis coordinate of photon 1 is placed at the
density maximum: ``y1 = y2`` for x-profiles and ``x1`` at the peak of the
x-profile for y-profiles.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.optimize import minimize_scalar

from .errors import PreconditionError, UnreliableMomentError, WindowTooSmallError

POSITION_AXES = ("x", "y")
MOMENTUM_AXES = ("kx", "ky")
CONDITIONING_MODES = ("slice", "marginal")

WINDOW_ERROR_RATIO = 1e-3
TAIL_MASS_LIMIT = 1e-3
TAIL_FRACTION = 0.02


@dataclass(frozen=True)
class ConditionalProfile:
    """Normalised 1D density of photon 1 along ``axis`` (``x1``, ``y1``,
    ``kx1`` or ``ky1``) for a fixed partner coordinate."""

    axis: str
    fixed_partner: tuple
    coords: np.ndarray
    density: np.ndarray
    plane_z: float = None
    normalization: float = 1.0
    conditioning: str = "slice"

    def __post_init__(self):
        coords = np.asarray(self.coords, float)
        density = np.asarray(self.density, float)
        if coords.ndim != 1 or coords.shape != density.shape:
            raise ValueError("coords and density must be 1D arrays of equal length")
        if coords.size < 3 or np.any(np.diff(coords) <= 0):
            raise ValueError("profile coordinates must be strictly increasing")
        if np.any(density < 0) or not np.all(np.isfinite(density)):
            raise ValueError("density must be finite and non-negative")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "density", density)

    @classmethod
    def from_samples(cls, axis, fixed_partner, coords, raw, plane_z=None, conditioning="slice"):
        """Normalise ``raw`` to unit trapezoid integral."""
        raw = np.asarray(raw, float)
        norm = trapezoid(raw, coords)
        if not norm > 0:
            raise ValueError("density integrates to zero; nothing to normalise")
        return cls(axis, tuple(fixed_partner), coords, raw / norm, plane_z, norm, conditioning)

    @property
    def samples(self):
        return np.column_stack([self.coords, self.density])

    @property
    def boundary_ratio(self):
        peak = self.density.max()
        return max(self.density[0], self.density[-1]) / peak

    def mean(self):
        return simpson(self.coords * self.density, x=self.coords) / simpson(
            self.density, x=self.coords
        )


@dataclass(frozen=True)
class UncertaintyResult:
    """Conditional uncertainties (mm and 1/mm) and their products."""

    dx1: float
    dy1: float
    dkx1: float
    dky1: float
    quad_error: float = 0.0
    product_x: float = field(init=False)
    product_y: float = field(init=False)

    def __post_init__(self):
        for name in ("dx1", "dy1", "dkx1", "dky1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "product_x", self.dx1 * self.dkx1)
        object.__setattr__(self, "product_y", self.dy1 * self.dky1)

    def as_dict(self):
        return {
            "dx1_mm": self.dx1,
            "dy1_mm": self.dy1,
            "dkx1_per_mm": self.dkx1,
            "dky1_per_mm": self.dky1,
            "product_x": self.product_x,
            "product_y": self.product_y,
            "quad_error": self.quad_error,
        }


@dataclass(frozen=True)
class GridConfig:
    """Sampling policy for ``uncertainties``.

    Windows are half-widths around the partner coordinate. Step sizes stay
    fixed when a window is enlarged, so the point count grows with it.
    """

    position_window: float = 2.0
    position_step: float = 2.5e-5
    momentum_window: float = None  # default: 7 / w0_eff
    momentum_points: int = 4001
    expand_factor: float = 1.5
    boundary_tol: float = 1e-6
    max_expansions: int = 12
    conditioning: str = "slice"
    marginal_points: int = 1201

    def __post_init__(self):
        if self.conditioning not in CONDITIONING_MODES:
            raise ValueError(f"conditioning must be one of {CONDITIONING_MODES}")
        if not self.expand_factor > 1:
            raise ValueError("expand_factor must exceed 1")


def _odd(n):
    n = int(n)
    return n if n % 2 else n + 1


def _grid(center, window, n):
    if not window > 0:
        raise ValueError("window must be positive")
    if n < 64:
        raise ValueError("need at least 64 samples")
    return center + np.linspace(-window, window, _odd(n))


def _check_window(density, what):
    ratio = max(density[0], density[-1]) / density.max()
    if ratio > WINDOW_ERROR_RATIO:
        raise WindowTooSmallError(
            f"{what}: boundary density is {ratio:.2e} of the peak; widen the window"
        )


def _refine_peak(density_at, profile):
    """Continuous maximiser of a 1D density near the sampled maximum.

    The y-profile is sensitive to the x-coordinate it is taken at, so the
    grid argmax (which moves with the step) is polished to ~1e-12 mm.
    """
    i = int(np.argmax(profile.density))
    x = profile.coords
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
    res = minimize_scalar(
        lambda t: -float(density_at(t)), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(hi - lo))},
    )
    return float(res.x) if -res.fun >= density_at(x[i]) else float(x[i])


def position_peak(field, rho2, z, profile):
    """``x1`` maximising the x-slice at ``y1 = y2``."""
    x2, y2 = float(rho2[0]), float(rho2[1])
    return _refine_peak(
        lambda t: np.abs(field.amplitude_position((t, y2), (x2, y2), z)) ** 2, profile
    )


def momentum_peak(field, q2, z, profile):
    kx2, ky2 = float(q2[0]), float(q2[1])
    return _refine_peak(
        lambda t: np.abs(field.amplitude_momentum((t, ky2), (kx2, ky2), z)) ** 2, profile
    )


def conditional_density_position(field, axis, rho2, z, window, n, off_axis=None, check=True):
    """Slice of ``|psi|^2`` along ``axis`` of ``rho1`` at fixed ``rho2``.

    The grid is centred on the partner coordinate and always contains it.
    ``off_axis`` overrides the peak-conditioned other coordinate of ``rho1``.
    """
    if axis not in POSITION_AXES:
        raise ValueError(f"axis must be one of {POSITION_AXES}")
    if z <= field.L:
        raise PreconditionError("position profiles need z > L")
    x2, y2 = float(rho2[0]), float(rho2[1])
    if axis == "x":
        xs = _grid(x2, window, n)
        y1 = y2 if off_axis is None else off_axis
        dens = np.abs(field.amplitude_position((xs, np.full_like(xs, y1)), (x2, y2), z)) ** 2
    else:
        ys = _grid(y2, window, n)
        if off_axis is None:
            px = conditional_density_position(field, "x", rho2, z, window, n, check=False)
            off_axis = position_peak(field, rho2, z, px)
        xs = ys
        dens = np.abs(field.amplitude_position((np.full_like(ys, off_axis), ys), (x2, y2), z)) ** 2
    if check:
        _check_window(dens, f"{axis}1 profile")
    return ConditionalProfile.from_samples(axis + "1", (x2, y2), xs, dens, plane_z=z)


def conditional_density_momentum(field, axis, q2, window, n, z=None, off_axis=None, check=True):
    """Slice of ``|psi(q1, q2)|^2`` along ``axis`` of ``q1`` at fixed ``q2``.

    The density does not depend on ``z``; it defaults to the crystal face.
    """
    if axis not in MOMENTUM_AXES:
        raise ValueError(f"axis must be one of {MOMENTUM_AXES}")
    z = field.L if z is None else z
    kx2, ky2 = float(q2[0]), float(q2[1])
    if axis == "kx":
        ks = _grid(kx2, window, n)
        other = ky2 if off_axis is None else off_axis
        q1 = (ks, np.full_like(ks, other))
    else:
        ks = _grid(ky2, window, n)
        if off_axis is None:
            px = conditional_density_momentum(field, "kx", q2, window, n, z, check=False)
            off_axis = momentum_peak(field, q2, z, px)
        q1 = (np.full_like(ks, off_axis), ks)
    dens = np.abs(field.amplitude_momentum(q1, (kx2, ky2), z)) ** 2
    if check:
        _check_window(dens, f"{axis}1 profile")
    return ConditionalProfile.from_samples(axis + "1", (kx2, ky2), ks, dens)


def std_dev(profile, tail_limit=TAIL_MASS_LIMIT):
    """Standard deviation by composite Simpson quadrature.

    Raises ``UnreliableMomentError`` when the outer ``2%`` of the window on
    either side together hold more than ``tail_limit`` of the mass.
    """
    x, d = profile.coords, profile.density
    mass = simpson(d, x=x)
    span = x[-1] - x[0]
    edge = (x < x[0] + TAIL_FRACTION * span) | (x > x[-1] - TAIL_FRACTION * span)
    tail = trapezoid(np.where(edge, d, 0.0), x) / trapezoid(d, x)
    if tail > tail_limit:
        raise UnreliableMomentError(
            f"{profile.axis}: {tail:.2e} of the mass sits in the window edges"
        )
    mean = simpson(x * d, x=x) / mass
    var = simpson((x - mean) ** 2 * d, x=x) / mass
    return float(np.sqrt(var))


def _half_grid_std(profile):
    x, d = profile.coords[::2], profile.density[::2]
    mass = simpson(d, x=x)
    mean = simpson(x * d, x=x) / mass
    return float(np.sqrt(simpson((x - mean) ** 2 * d, x=x) / mass))


def _expanding(sample, window, n_for, cfg):
    """Enlarge the window by ``expand_factor`` until the edges are quiet."""
    for _ in range(cfg.max_expansions + 1):
        prof = sample(window, n_for(window))
        if prof.boundary_ratio < cfg.boundary_tol:
            return prof
        window *= cfg.expand_factor
    raise WindowTooSmallError(
        f"boundary density still {prof.boundary_ratio:.2e} of peak after "
        f"{cfg.max_expansions} expansions"
    )


def _sinh_grid(center, window, scale, n):
    t_max = np.arcsinh(window / scale)
    t = np.linspace(-t_max, t_max, _odd(n))
    return t, center + scale * np.sinh(t), scale * np.cosh(t)


def marginal_density_position(field, axis, rho2, z, window, n, scale=2e-4):
    """Density of one coordinate of ``rho1`` integrated over the other one.

    Both axes use a ``sinh``-stretched grid that is dense around the partner
    coordinate, where the amplitude has a narrow logarithmic peak.
    """
    x2, y2 = float(rho2[0]), float(rho2[1])
    tx, xs, jx = _sinh_grid(x2, window, scale, n)
    ty, ys, jy = _sinh_grid(y2, window, scale, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    dens = np.abs(field.amplitude_position((X, Y), (x2, y2), z)) ** 2
    if axis == "x":
        marg, coords = simpson(dens * jy[None, :], x=ty, axis=1), xs
    else:
        marg, coords = simpson(dens * jx[:, None], x=tx, axis=0), ys
    marg = np.clip(marg, 0.0, None)
    return ConditionalProfile.from_samples(
        axis + "1", (x2, y2), coords, marg, plane_z=z, conditioning="marginal"
    )


def marginal_density_momentum(field, axis, q2, window, n, z=None):
    """Momentum analogue of ``marginal_density_position`` on a uniform grid."""
    z = field.L if z is None else z
    kx2, ky2 = float(q2[0]), float(q2[1])
    kx = _grid(kx2, window, n)
    ky = _grid(ky2, window, n)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    dens = np.abs(field.amplitude_momentum((KX, KY), (kx2, ky2), z)) ** 2
    if axis == "kx":
        marg, coords = simpson(dens, x=ky, axis=1), kx
    else:
        marg, coords = simpson(dens, x=kx, axis=0), ky
    marg = np.clip(marg, 0.0, None)
    return ConditionalProfile.from_samples(
        axis + "1", (kx2, ky2), coords, marg, conditioning="marginal"
    )


def default_momentum_window(field):
    return 7.0 / np.sqrt(field.beam.w0_eff_sq)


def uncertainties(field, rho2=(0.0, 0.0), q2=(0.0, 0.0), z=None, grid=None):
    """All four conditional uncertainties at plane ``z``.

    ``quad_error`` is the largest relative change of any of the four values
    when every second sample is dropped.
    """
    cfg = GridConfig() if grid is None else grid
    if z is None:
        raise ValueError("z is required")
    kwin = cfg.momentum_window or default_momentum_window(field)

    if cfg.conditioning == "marginal":
        n2 = cfg.marginal_points
        pos = {
            a: _expanding(
                lambda w, n, a=a: marginal_density_position(field, a, rho2, z, w, n),
                cfg.position_window, lambda w: n2, cfg,
            )
            for a in POSITION_AXES
        }
        mom = {
            a: _expanding(
                lambda w, n, a=a: marginal_density_momentum(field, a, q2, w, n),
                kwin, lambda w: n2, cfg,
            )
            for a in MOMENTUM_AXES
        }
    else:
        def n_pos(w):
            return _odd(2 * w / cfg.position_step + 1)

        px = _expanding(
            lambda w, n: conditional_density_position(field, "x", rho2, z, w, n, check=False),
            cfg.position_window, n_pos, cfg,
        )
        x_peak = position_peak(field, rho2, z, px)
        py = _expanding(
            lambda w, n: conditional_density_position(
                field, "y", rho2, z, w, n, off_axis=x_peak, check=False
            ),
            cfg.position_window, n_pos, cfg,
        )
        step = 2 * kwin / (cfg.momentum_points - 1)

        def n_mom(w):
            return _odd(2 * w / step + 1)

        pkx = _expanding(
            lambda w, n: conditional_density_momentum(field, "kx", q2, w, n, check=False),
            kwin, n_mom, cfg,
        )
        kx_peak = momentum_peak(field, q2, field.L, pkx)
        pky = _expanding(
            lambda w, n: conditional_density_momentum(
                field, "ky", q2, w, n, off_axis=kx_peak, check=False
            ),
            kwin, n_mom, cfg,
        )
        pos = {"x": px, "y": py}
        mom = {"kx": pkx, "ky": pky}

    profiles = [pos["x"], pos["y"], mom["kx"], mom["ky"]]
    values = [std_dev(p) for p in profiles]
    halves = [_half_grid_std(p) for p in profiles]
    quad_error = max(abs(v - h) / v for v, h in zip(values, halves))
    return UncertaintyResult(*values, quad_error=quad_error)


def profiles_for(field, rho2=(0.0, 0.0), q2=(0.0, 0.0), z=None, grid=None):
    """The four profiles ``uncertainties`` would integrate (slice mode)."""
    cfg = GridConfig() if grid is None else replace(grid, conditioning="slice")
    kwin = cfg.momentum_window or default_momentum_window(field)
    n_pos = _odd(2 * cfg.position_window / cfg.position_step + 1)
    px = conditional_density_position(field, "x", rho2, z, cfg.position_window, n_pos)
    py = conditional_density_position(
        field, "y", rho2, z, cfg.position_window, n_pos,
        off_axis=position_peak(field, rho2, z, px),
    )
    pkx = conditional_density_momentum(field, "kx", q2, kwin, cfg.momentum_points)
    pky = conditional_density_momentum(
        field, "ky", q2, kwin, cfg.momentum_points,
        off_axis=momentum_peak(field, q2, field.L, pkx),
    )
    return {"x1": px, "y1": py, "kx1": pkx, "ky1": pky}
