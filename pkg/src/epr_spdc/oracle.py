"""Independent brute-force checks for the main numeric path.

Nothing here calls into ``specfun`` or the amplitude code of ``biphoton``:
special functions come from mpmath series, SciPy's own Faddeeva/sici
routines, or QUADPACK; the momentum amplitude that feeds the DFT is
re-implemented from scratch. ``biphoton`` types are used only as
parameter containers.
"""

import csv
from dataclasses import dataclass
from math import factorial

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvergenceError, DomainError, ResolutionError

ERF_ORACLE_RADIUS = 6.0
EI_ORACLE_RADIUS = 40.0
SAMPLES_PER_LOBE = 8


# ---------------------------------------------------------------------------
# special functions


def _erf_series_scalar(z, dps=40, bound=1e-20):
    with mpmath.workdps(dps):
        z = mpmath.mpc(z)
        z2 = z * z
        term = z  # z^(2n+1) (-1)^n / n!
        total = mpmath.mpc(0)
        n = 0
        a2 = abs(z2)
        while True:
            contrib = term / (2 * n + 1)
            total += contrib
            n += 1
            term = -term * z2 / n
            # tail after this point is dominated by a geometric series once n > |z|^2
            nxt = abs(term) / (2 * n + 1)
            if n > a2 and nxt / (1 - a2 / (n + 1)) * 2 / mpmath.sqrt(mpmath.pi) < bound * max(
                abs(total) * 2 / mpmath.sqrt(mpmath.pi), 1e-300
            ):
                break
        return complex(2 / mpmath.sqrt(mpmath.pi) * total)


def erf_series_oracle(z):
    """Maclaurin series of erf in 40-digit arithmetic, ``|z| <= 6``.

    Summation stops once the remaining tail is provably below ``1e-20``
    relative (the terms decay geometrically once ``n > |z|^2``), well inside
    the ``1e-14`` the comparisons need.
    """
    z = np.asarray(z, complex)
    if np.any(np.abs(z) > ERF_ORACLE_RADIUS) or not np.all(np.isfinite(z)):
        raise DomainError(f"erf oracle is limited to |z| <= {ERF_ORACLE_RADIUS}")
    out = np.vectorize(_erf_series_scalar, otypes=[complex])(z)
    return out.item() if out.ndim == 0 else out


def _ei_series_scalar(z, dps=60):
    with mpmath.workdps(dps):
        z = mpmath.mpc(z)
        total = mpmath.mpc(0)
        term = mpmath.mpc(1)
        k = 1
        while True:
            term = term * z / k
            contrib = term / k
            total += contrib
            if abs(contrib) < mpmath.mpf(10) ** (-dps + 5) * max(abs(total), 1) and k > abs(z):
                break
            k += 1
        log = mpmath.log(z) if not (z.imag == 0 and z.real < 0) else mpmath.log(-z.real)
        return complex(mpmath.euler + log + total)


def ei_series_oracle(z):
    """``gamma + Log z + sum z^k / (k k!)`` in 60-digit arithmetic, ``|z| <= 40``."""
    z = np.asarray(z, complex)
    if np.any(np.abs(z) > EI_ORACLE_RADIUS) or np.any(z == 0):
        raise DomainError(f"Ei oracle needs 0 < |z| <= {EI_ORACLE_RADIUS}")
    out = np.vectorize(_ei_series_scalar, otypes=[complex])(z)
    return out.item() if out.ndim == 0 else out


def ei_imag_oracle(x):
    """``Ei(i x) = Ci(|x|) + i (Si(x) + sign(x) pi/2)`` from SciPy's sici."""
    x = np.asarray(x, float)
    si, ci = special.sici(np.abs(x))
    return ci + 1j * np.sign(x) * (si + np.pi / 2)


def ei_difference_oracle(x1, x2):
    """``Ei(i x1) - Ei(i x2)`` as the contour integral of ``e^{it}/t`` over ``[x2, x1]``.

    QUADPACK's oscillatory rules (QAWO) handle ``cos t / t`` and ``sin t / t``.
    """

    def one(a, b):
        if a == b:
            return 0j
        lo, hi, sign = (b, a, 1.0) if a > b else (a, b, -1.0)
        kw = dict(wvar=1.0, limit=500, epsabs=1e-14, epsrel=1e-13)
        re = integrate.quad(lambda t: 1.0 / t, lo, hi, weight="cos", **kw)[0]
        im = integrate.quad(lambda t: 1.0 / t, lo, hi, weight="sin", **kw)[0]
        return sign * complex(re, im)

    out = np.vectorize(one, otypes=[complex])(np.asarray(x1, float), np.asarray(x2, float))
    return out.item() if out.ndim == 0 else out


def sinc_oracle(x):
    return np.sinc(np.asarray(x, float) / np.pi)


# ---------------------------------------------------------------------------
# coefficients, re-derived in mpmath


@dataclass(frozen=True)
class Coefficients:
    k_v: float
    beta_sq: float
    walk_off: float
    b1: complex
    b2: float
    L_prime: float


def coefficient_oracle(crystal, beam, z, beta_sq=None):
    """Every derived length/coefficient at plane ``z`` in 40-digit arithmetic.

    ``beta_sq`` replaces ``L / 4 k_p`` (thin-crystal limits).
    """
    with mpmath.workdps(40):
        lam = mpmath.mpf(beam.lambda_p) * mpmath.mpf("1e-6")
        k_v = 2 * mpmath.pi / lam
        n_bar = mpmath.mpf(crystal.n_bar_o)
        L = mpmath.mpf(crystal.L)
        k_p = mpmath.mpf(crystal.eta_p) * k_v
        beta_sq = L / (4 * k_p) if beta_sq is None else mpmath.mpf(beta_sq)
        th = mpmath.mpf(crystal.theta)
        no2, ne2 = mpmath.mpf(crystal.n_o_pump) ** 2, mpmath.mpf(crystal.n_e_pump) ** 2
        lt = (no2 - ne2) * mpmath.sin(th) * mpmath.cos(th) / (
            no2 * mpmath.sin(th) ** 2 + ne2 * mpmath.cos(th) ** 2
        ) * L / 2
        if beam.m2_mode == "rayleigh":
            w_sq = mpmath.mpf(beam.w0) ** 2 / mpmath.mpf(beam.m2)
        else:
            w_sq = mpmath.mpf(beam.w0) ** 2 * mpmath.mpf(beam.m2)
        zz = mpmath.mpf(z)
        a = zz - mpmath.mpf(beam.z_c) - 1j * k_v * w_sq / 2
        b1 = a / (2 * k_v) - 2 * (n_bar - 1) * beta_sq
        b2 = zz / (2 * k_v) - (2 * n_bar - 1) * beta_sq
        return Coefficients(
            float(k_v), float(beta_sq), float(lt), complex(b1), float(b2),
            float((1 - 1 / n_bar) * L),
        )


# ---------------------------------------------------------------------------
# separable momentum amplitude, re-implemented


def _q_part(c, amp_phase, qx, qy):
    return (
        amp_phase
        * sinc_oracle(c.walk_off * qx)
        * np.exp(-1j * c.walk_off * qx)
        * np.exp(-1j * c.b1 * (qx**2 + qy**2))
    )


def _p_part(c, px, py):
    p2 = px**2 + py**2
    return sinc_oracle(c.beta_sq * p2) * np.exp(-1j * c.b2 * p2)


@dataclass(frozen=True)
class GridSpec:
    """Square DFT grid: ``points`` per axis over ``[-extent, extent)``.

    ``offset`` shifts the *output* grid (R or S) by that many output bins
    in both directions, implemented as a phase ramp on the input.
    """

    extent: float
    points: int = 512
    offset: float = 0.0

    def __post_init__(self):
        if self.points < 64 or self.points & (self.points - 1):
            raise ValueError("points must be a power of two >= 64")
        if not self.extent > 0:
            raise ValueError("extent must be positive")

    @property
    def step(self):
        return 2 * self.extent / self.points

    @property
    def conjugate_step(self):
        return 2 * np.pi / (self.points * self.step)

    def input_axis(self):
        return (np.arange(self.points) - self.points // 2) * self.step

    def output_axis(self):
        return (np.arange(self.points) - self.points // 2 + self.offset) * self.conjugate_step


def _dft2(values, grid):
    """``(2 pi)^-2 Int f(k) exp(i k.r) d^2k`` sampled on ``grid.output_axis()``."""
    n = grid.points
    idx = np.arange(n) - n // 2
    r_off = grid.offset * grid.conjugate_step
    ramp = np.exp(1j * idx * grid.step * r_off)
    g = values * ramp[:, None] * ramp[None, :]
    out = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(g))) * n * n
    return out * (grid.step / (2 * np.pi)) ** 2


def check_lobe_resolution(walk_off, beta_sq, q_grid, p_grid, samples=SAMPLES_PER_LOBE):
    """Raise ``ResolutionError`` unless each sinc lobe gets ``samples`` points.

    The walk-off sinc has lobes of width ``pi / l_t`` in ``Q_x``; the lobes of
    ``sinc(beta^2 P^2)`` narrow with ``P`` and are ``pi / (2 beta^2 P)`` wide
    at the edge of the grid.
    """
    if walk_off > 0 and q_grid.step > np.pi / walk_off / samples:
        raise ResolutionError(
            f"Q step {q_grid.step:.4g} > pi/(l_t {samples}) = {np.pi / walk_off / samples:.4g}"
        )
    if beta_sq > 0:
        lobe = np.pi / (2 * beta_sq * p_grid.extent)
        if p_grid.step > lobe / samples:
            raise ResolutionError(
                f"P step {p_grid.step:.4g} > edge lobe/{samples} = {lobe / samples:.4g}"
            )


def default_grids(field, points=512):
    """Largest lobe-resolving P grid and a Q grid reaching ``exp(-20)`` of the pump."""
    q_ext = 9.0 / np.sqrt(field.beam.w0_eff_sq)
    if field.lt > 0:
        q_ext = min(q_ext, points * np.pi / (2 * SAMPLES_PER_LOBE * field.lt))
    # step = 2 P / N  <=  pi / (2 beta^2 P samples)
    if field.beta_sq > 0:
        p_ext = 0.999 * np.sqrt(points * np.pi / (4 * SAMPLES_PER_LOBE * field.beta_sq))
    else:
        p_ext = q_ext
    # Half-bin S offset keeps the logarithmic S = 0 value, which the truncated
    # P integral reproduces worst, off the comparison grid.
    return GridSpec(q_ext, points), GridSpec(p_ext, points, offset=0.5)


@dataclass
class DFTResult:
    R: np.ndarray
    S: np.ndarray
    r_field: np.ndarray  # (R_x, R_y) grid
    s_field: np.ndarray  # (S_x, S_y) grid

    def relative_l2(self, r_ref, s_ref):
        """4D relative L2 distance between ``r_field (x) s_field`` and the reference
        factors, without forming the 4D arrays."""
        a, b, c, d = self.r_field, self.s_field, r_ref, s_ref
        na, nb = np.vdot(a, a).real, np.vdot(b, b).real
        nc, nd = np.vdot(c, c).real, np.vdot(d, d).real
        cross = (np.vdot(c, a) * np.vdot(d, b)).real
        err2 = na * nb + nc * nd - 2 * cross
        return float(np.sqrt(max(err2, 0.0) / (nc * nd)))


def dft_transform_oracle(field, z, q_grid=None, p_grid=None, check=True):
    """Numerical Fourier transform of the separable momentum amplitude.

    The ``Q`` and ``P`` parts are transformed separately (2D each); their
    outer product is the 4D position amplitude on the ``(R, S)`` grid.
    """
    if q_grid is None or p_grid is None:
        dq, dp = default_grids(field)
        q_grid = q_grid or dq
        p_grid = p_grid or dp
    c = coefficient_oracle(field.crystal, field.beam, z, beta_sq=field.beta2)
    if field.walk_off is not None:
        c = Coefficients(c.k_v, c.beta_sq, field.walk_off, c.b1, c.b2, c.L_prime)
    if check:
        check_lobe_resolution(c.walk_off, c.beta_sq, q_grid, p_grid)
    phase = field.beam.amplitude * np.exp(1j * c.k_v * z)
    q = q_grid.input_axis()
    p = p_grid.input_axis()
    QX, QY = np.meshgrid(q, q, indexing="ij")
    PX, PY = np.meshgrid(p, p, indexing="ij")
    r_field = _dft2(_q_part(c, phase, QX, QY), q_grid)
    s_field = _dft2(_p_part(c, PX, PY), p_grid)
    return DFTResult(q_grid.output_axis(), p_grid.output_axis(), r_field, s_field)


def dft_relative_error(field, z, q_grid=None, p_grid=None):
    """Relative L2 distance between the closed-form position amplitude and the DFT."""
    res = dft_transform_oracle(field, z, q_grid, p_grid)
    RX, RY = np.meshgrid(res.R, res.R, indexing="ij")
    SX, SY = np.meshgrid(res.S, res.S, indexing="ij")
    r_ref = field.r_factor((RX, RY), z)
    s_ref = field.s_factor((SX, SY), z)
    return res.relative_l2(r_ref, s_ref)


def gaussian_stub_error(b1, grid):
    """DFT of ``exp(-i b1 Q^2)`` against its closed form (``Im b1 < 0``)."""
    q = grid.input_axis()
    QX, QY = np.meshgrid(q, q, indexing="ij")
    num = _dft2(np.exp(-1j * b1 * (QX**2 + QY**2)), grid)
    r = grid.output_axis()
    RX, RY = np.meshgrid(r, r, indexing="ij")
    exact = np.pi / (1j * b1) * np.exp(-(RX**2 + RY**2) / (4j * b1)) / (2 * np.pi) ** 2
    return float(np.linalg.norm(num - exact) / np.linalg.norm(exact))


# ---------------------------------------------------------------------------
# moments by adaptive quadrature


def _position_density_oracle(field, c, rho1, rho2, z):
    (x1, y1), (x2, y2), nu = rho1, rho2, field.nu
    rx = 0.5 * ((1 + nu) * x1 + (1 - nu) * x2)
    ry = 0.5 * ((1 + nu) * y1 + (1 - nu) * y2)
    s2 = 0.25 * ((x1 - x2) ** 2 + (y1 - y2) ** 2)
    root = np.sqrt(1j * c.b1)
    w = 2 * root
    lt = c.walk_off
    erf_part = (special.erf(rx / w) - special.erf((rx - 2 * lt) / w)) / (2 * lt)
    r_abs2 = np.abs(np.exp(-ry**2 / (4j * c.b1)) * erf_part / root) ** 2
    gap, gap_p = z - field.L, z - c.L_prime
    s2 = np.asarray(s2, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u_near = c.k_v * s2 / (2 * gap)
        u_far = c.k_v * s2 / (2 * gap_p)
        diff = ei_imag_oracle(u_near) - ei_imag_oracle(u_far)
    diff = np.where(s2 == 0, np.log(gap_p / gap) + 0j, diff)
    return r_abs2 * np.abs(diff) ** 2


def _momentum_density_oracle(field, c, q1, q2):
    (k1x, k1y), (k2x, k2y), nu = q1, q2, field.nu
    qx, qy = k1x + k2x, k1y + k2y
    px = (1 - nu) * k1x - (1 + nu) * k2x
    py = (1 - nu) * k1y - (1 + nu) * k2y
    w_sq = -4 * c.b1.imag
    return (
        sinc_oracle(c.walk_off * qx) ** 2
        * np.exp(-0.5 * w_sq * (qx**2 + qy**2))
        * sinc_oracle(c.beta_sq * (px**2 + py**2)) ** 2
    )


# Gauss-Kronrod 7/15 nodes and weights (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[[13, 11, 9]] = _WG[:3]
_GW[7] = _WG[3]


def _gk15(f, a, b):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    x = (c[:, None] + h[:, None] * _NODES[None, :]).ravel()
    y = f(x).reshape(-1, a.size, 15)
    kron = h * (y @ _KW)
    gauss = h * (y @ _GW)
    return kron, np.max(np.abs(kron - gauss), axis=0)


def adaptive_integrate(f, a, b, points=(), tol=1e-10, max_intervals=2_000_000):
    """Globally adaptive Gauss-Kronrod quadrature of a vector-valued ``f``.

    ``f`` maps an array of abscissae to an array of shape ``(k, n)``. Each
    sweep bisects every interval whose error estimate exceeds its share of
    the remaining budget ``tol * max(|I|)``; all new nodes are evaluated in
    one call, which is what makes very oscillatory integrands affordable.
    Returns ``(integral, error_estimate)``.
    """
    edges = np.unique(np.concatenate([[a, b], [p for p in points if a < p < b]]))
    lo, hi = edges[:-1], edges[1:]
    vals, errs = _gk15(f, lo, hi)
    while True:
        total = vals.sum(axis=1)
        scale = np.max(np.abs(total))
        budget = tol * scale
        if errs.sum() <= budget:
            return total, float(errs.sum())
        if lo.size > max_intervals:
            raise ConvergenceError(
                f"adaptive quadrature stopped at {lo.size} intervals with error "
                f"{errs.sum() / scale:.2e} (target {tol:.1e})"
            )
        split = errs > budget / lo.size
        if not split.any():
            split = errs >= errs.max()
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        nv, ne = _gk15(f, new_lo, new_hi)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        vals = np.concatenate([vals[:, keep], nv], axis=1)
        errs = np.concatenate([errs[keep], ne])


def _peak(f, center, half_width, n=4001):
    t = np.linspace(center - half_width, center + half_width, n)
    v = f(t)
    i = int(np.argmax(v))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, n - 1)]
    res = optimize.minimize_scalar(lambda s: -float(f(np.array([s]))[0]), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-13})
    return float(res.x)


def moment_quadrature_oracle(field, axis, fixed_partner, z=None, window=None, tol=1e-6):
    """Standard deviation of a conditional slice by adaptive quadrature.

    The amplitude is rebuilt from SciPy's complex ``erf`` and ``sici``;
    the moments come from ``adaptive_integrate`` (tolerance driven, no
    fixed grid). The off-axis coordinate is the slice maximum, found
    independently of ``moments``.

    Close to the crystal face the position amplitude carries a weak but
    extremely fast oscillation (phase ``~ k S^2 / 2(z - L)``); resolving it
    to ``1e-8`` takes millions of intervals, whereas ``tol = 1e-6`` already
    fixes the standard deviation to ~1e-8 relative.
    """
    z_eval = field.L if z is None else z
    c = coefficient_oracle(field.crystal, field.beam, z_eval)
    a2, b2 = float(fixed_partner[0]), float(fixed_partner[1])
    if axis in ("x", "y"):
        if z is None:
            raise ValueError("position moments need z")

        def dens(u, v):
            return _position_density_oracle(field, c, (u, v), (a2, b2), z)

        window = 6.0 if window is None else window
        if axis == "x":
            centre = a2
            slice_ = lambda t: dens(t, np.full_like(t, b2))  # noqa: E731
            pts = [a2 - 1e-3, a2, a2 + 1e-3, a2 + 2 * c.walk_off]
        else:
            x_peak = _peak(lambda t: dens(t, np.full_like(t, b2)), a2, 2e-3)
            centre = b2
            slice_ = lambda t: dens(np.full_like(t, x_peak), t)  # noqa: E731
            pts = [b2 - 1e-3, b2, b2 + 1e-3]
    elif axis in ("kx", "ky"):

        def dens(u, v):
            return _momentum_density_oracle(field, c, (u, v), (a2, b2))

        w = np.sqrt(-4 * c.b1.imag)
        window = 12.0 / w if window is None else window
        if axis == "kx":
            centre = a2
            slice_ = lambda t: dens(t, np.full_like(t, b2))  # noqa: E731
        else:
            k_peak = _peak(lambda t: dens(t, np.full_like(t, b2)), a2, 1.0 / w)
            centre = b2
            slice_ = lambda t: dens(np.full_like(t, k_peak), t)  # noqa: E731
        pts = [centre]
    else:
        raise ValueError(f"unknown axis {axis!r}")

    lo, hi = centre - window, centre + window
    # rough width so the three moment integrands have comparable size
    t = np.linspace(lo, hi, 20001)
    v = slice_(t)
    mass0 = integrate.trapezoid(v, t)
    spread = np.sqrt(abs(integrate.trapezoid((t - centre) ** 2 * v, t) / mass0)) or 1.0

    def vec(t):
        d = slice_(t) / mass0
        s = (t - centre) / spread
        return np.stack([d, s * d, s * s * d])

    m, _ = adaptive_integrate(vec, lo, hi, points=pts, tol=tol)
    mean = m[1] / m[0]
    return float(spread * np.sqrt(m[2] / m[0] - mean * mean))


def sech_std_closed_form(sigma):
    """Standard deviation of the density ``sech(pi x / 2 sigma) / (2 sigma)`` (equals sigma),
    by direct integration."""
    def f(t):
        return t * t * np.exp(-np.pi * t / (2 * sigma)) / (1 + np.exp(-np.pi * t / sigma)) / sigma

    var = 2 * integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13)[0]
    return float(np.sqrt(var))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Comparison:
    quantity: str
    main_value: float
    oracle_value: float
    rel_error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.rel_error <= self.tolerance)


def compare(quantity, main, oracle, tolerance, absolute=False):
    main, oracle = complex(main), complex(oracle)
    err = abs(main - oracle)
    if not absolute:
        err = err / abs(oracle) if oracle != 0 else err
    return Comparison(quantity, abs(main), abs(oracle), float(err), float(tolerance))


def write_comparison_csv(path, comparisons):
    with open(path, "w", newline="") as fh:
        fh.write("# schema=comparison version=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "main_value", "oracle_value", "rel_error", "tolerance", "passed"])
        for c in comparisons:
            w.writerow([c.quantity, f"{c.main_value:.12g}", f"{c.oracle_value:.12g}",
                        f"{c.rel_error:.12g}", f"{c.tolerance:.12g}", int(c.passed)])


def erf_coefficient_count():
    """Number of Maclaurin terms the oracle needs at ``|z| = 6`` (for reports)."""
    n, term = 0, 6.0
    while term > 1e-17:
        n += 1
        term = term * 36 / n
    return n


__all__ = [
    "erf_series_oracle", "ei_series_oracle", "ei_imag_oracle", "ei_difference_oracle",
    "sinc_oracle", "coefficient_oracle", "GridSpec", "default_grids", "dft_transform_oracle",
    "dft_relative_error", "gaussian_stub_error", "check_lobe_resolution",
    "moment_quadrature_oracle", "sech_std_closed_form", "Comparison", "compare",
    "write_comparison_csv", "factorial",
]
