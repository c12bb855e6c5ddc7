"""Detector emulation: finite circular apertures and profile fitting.

Image-plane profiles are fitted with ``A sech(pi (x - x0) / 2 sigma)``,
whose standard deviation is ``sigma``; Fourier-plane profiles with
``A exp(-(x - x0)^2 / 2 sigma^2)``.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import least_squares
from scipy.signal import fftconvolve

from . import moments
from .errors import FitError, GridTooCoarseError
from .moments import ConditionalProfile

IMAGE_GAP_MM = 1e-4
MAX_FIT_ITERATIONS = 200


@dataclass(frozen=True)
class DetectorAperture:
    """Circular fibre tip of the given diameter (mm)."""

    diameter: float = 0.050

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError(f"aperture diameter must be positive, got {self.diameter}")

    @property
    def radius(self):
        return 0.5 * self.diameter


@dataclass(frozen=True)
class Detectors:
    """The two detectors and the Fourier-plane lens.

    ``None`` for an aperture means a point detector.
    """

    d1: DetectorAperture = DetectorAperture()
    d2: DetectorAperture = DetectorAperture()
    focal_length: float = 75.0
    lambda_nm: float = 690.0

    @property
    def k_det(self):
        return 2 * np.pi / (self.lambda_nm * 1e-6)

    def position_to_wavevector(self, x):
        """Fourier-plane detector position (mm) to transverse wavevector (1/mm)."""
        return np.asarray(x) * self.k_det / self.focal_length

    def wavevector_to_position(self, q):
        return np.asarray(q) * self.focal_length / self.k_det


def disk_kernel(radius, dx, dy, supersample=8):
    """Normalised disk indicator on a grid, with fractional edge cells.

    Each cell is split into ``supersample**2`` sub-cells whose centres are
    tested for inclusion, so the kernel area converges to ``pi r^2``.
    A radius below half a cell gives the one-cell identity kernel.
    """
    nx = int(np.ceil(radius / dx))
    ny = int(np.ceil(radius / dy))
    ix = np.arange(-nx, nx + 1)
    iy = np.arange(-ny, ny + 1)
    sub = (np.arange(supersample) + 0.5) / supersample - 0.5
    sx = (ix[:, None] + sub[None, :]).ravel() * dx
    sy = (iy[:, None] + sub[None, :]).ravel() * dy
    inside = (sx[:, None] ** 2 + sy[None, :] ** 2) <= radius**2
    k = inside.reshape(ix.size, supersample, iy.size, supersample).sum(axis=(1, 3))
    k = k.astype(float)
    if k.sum() == 0:
        k[nx, ny] = 1.0
    return k / k.sum()


def convolve_aperture(density, dx, dy, aperture, aperture2=None, check=True):
    """Convolve a sampled 2D density with the disk of ``aperture``.

    ``aperture2`` folds in the partner detector as a second disk convolution,
    which is exact when the density depends on ``rho1 - rho2`` only. The
    result is renormalised to unit integral (``sum * dx * dy``).
    """
    density = np.asarray(density, float)
    out = density
    for ap in (aperture, aperture2):
        if ap is None:
            continue
        if check and (dx > ap.diameter / 8 or dy > ap.diameter / 8):
            raise GridTooCoarseError(
                f"grid spacing ({dx:g}, {dy:g}) mm exceeds diameter/8 = {ap.diameter / 8:g} mm"
            )
        out = fftconvolve(out, disk_kernel(ap.radius, dx, dy), mode="same")
    out = np.clip(out, 0.0, None)
    return out / (out.sum() * dx * dy)


def disk_nodes(radius, n_radial=4, n_angular=12):
    """Quadrature nodes and weights (summing to 1) for the average over a disk."""
    if radius == 0:
        return np.zeros((1, 2)), np.ones(1)
    # Gauss-Legendre in r^2 makes the area weight uniform
    t, w = np.polynomial.legendre.leggauss(n_radial)
    r = radius * np.sqrt(0.5 * (t + 1))
    phi = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    pts = np.array([(ri * np.cos(p), ri * np.sin(p)) for ri in r for p in phi])
    wts = np.repeat(0.5 * w, n_angular) / n_angular
    return pts, wts


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    sigma: float
    center: float
    offset: float
    residual_rms: float
    converged: bool
    iterations: int
    model: str

    def evaluate(self, x):
        """Fitted curve at ``x``."""
        return _MODELS[self.model](np.asarray(x, float), self.amplitude, self.sigma,
                                   self.center) + self.offset


def _sech(x, amp, sigma, center):
    arg = np.pi * (x - center) / (2 * sigma)
    return amp / np.cosh(np.clip(arg, -700, 700))


def _gauss(x, amp, sigma, center):
    return amp * np.exp(-((x - center) ** 2) / (2 * sigma**2))


_MODELS = {"sech": _sech, "gaussian": _gauss}


def _xy(profile):
    if isinstance(profile, ConditionalProfile):
        return profile.coords, profile.density
    x, y = profile
    return np.asarray(x, float), np.asarray(y, float)


def _fit(model, profile, with_offset, max_iter):
    x, y = _xy(profile)
    if x.size < 16:
        raise ValueError("fitting needs at least 16 samples")
    f = _MODELS[model]
    w = np.clip(y, 0, None)
    total = trapezoid(w, x)
    c0 = trapezoid(x * w, x) / total
    s0 = np.sqrt(trapezoid((x - c0) ** 2 * w, x) / total)
    if not s0 > 0:
        raise ValueError("profile has no spread")
    if x[-1] - x[0] < 4 * s0:
        raise ValueError("samples must span at least four standard deviations")
    p0 = [y.max(), s0, c0] + ([0.0] if with_offset else [])

    def resid(p):
        r = f(x, p[0], abs(p[1]), p[2]) - y
        if with_offset:
            r = r + p[3]
        return r

    res = least_squares(
        resid, p0, method="lm", max_nfev=max_iter * (len(p0) + 1),
        xtol=1e-15, ftol=1e-15, gtol=1e-15, x_scale="jac",
    )
    iterations = int(res.nfev)
    converged = res.status > 0
    if not converged:
        raise FitError(f"{model} fit did not converge: {res.message}")
    amp, sigma, center = res.x[0], abs(res.x[1]), res.x[2]
    offset = res.x[3] if with_offset else 0.0
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return FitResult(float(amp), float(sigma), float(center), float(offset), rms,
                     converged, iterations, model)


def fit_sech(profile, with_offset=False, max_iter=MAX_FIT_ITERATIONS):
    """Levenberg-Marquardt fit of ``A sech(pi (x - x0) / 2 sigma)``.

    ``profile`` is a ``ConditionalProfile`` or an ``(x, y)`` pair.
    """
    return _fit("sech", profile, with_offset, max_iter)


def fit_gaussian(profile, with_offset=False, max_iter=MAX_FIT_ITERATIONS):
    """Levenberg-Marquardt fit of ``A exp(-(x - x0)^2 / 2 sigma^2)``."""
    return _fit("gaussian", profile, with_offset, max_iter)


def _slice_at_peak(grid2d, coords_a, coords_b, axis_index):
    """1D cut of ``grid2d`` along ``axis_index`` through the maximum of the other axis."""
    i, j = np.unravel_index(np.argmax(grid2d), grid2d.shape)
    if axis_index == 0:
        return coords_a, grid2d[:, j]
    return coords_b, grid2d[i, :]


def predicted_detection_profile(field, axis, plane="image", detectors=None,
                                window=None, step=None, z=None, quad=(3, 8)):
    """Expected coincidence profile seen by detector 1 with detector 2 at the origin.

    ``axis`` is ``"x"`` or ``"y"``. On the image plane the density is taken
    at ``z = L + 1e-4`` mm (unless ``z`` is given) and the returned
    coordinates are detector positions in mm. On the Fourier plane the
    momentum density is mapped through ``x = f q / k_det``; coordinates are
    again detector positions in mm (use ``Detectors.position_to_wavevector``
    to convert fitted widths back to 1/mm).

    Point detectors (``d1 = d2 = None``) reproduce the plain conditional
    slice from ``moments``.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    return predicted_detection_profiles(field, plane, detectors, window, step, z, quad,
                                        axes=(axis,))[axis]


def predicted_detection_profiles(field, plane="image", detectors=None, window=None,
                                 step=None, z=None, quad=(3, 8), axes=("x", "y")):
    """Both axis profiles of ``predicted_detection_profile`` from one 2D grid."""
    if plane not in ("image", "fourier"):
        raise ValueError("plane must be 'image' or 'fourier'")
    det = Detectors() if detectors is None else detectors
    point = det.d1 is None and det.d2 is None

    if plane == "image":
        z = field.L + IMAGE_GAP_MM if z is None else z
        window = 0.8 if window is None else window
        if point:
            n = int(round(2 * window / (step or 2.5e-5))) + 1
            return {
                a: moments.conditional_density_position(field, a, (0.0, 0.0), z, window, n)
                for a in axes
            }
        r2 = 0.0 if det.d2 is None else det.d2.radius
        step = step or _default_step(det)
        coords = _sym_grid(window, step)
        X, Y = np.meshgrid(coords, coords, indexing="ij")
        pts, wts = disk_nodes(r2, *quad)
        dens = np.zeros_like(X)
        for (px, py), wt in zip(pts, wts):
            dens += wt * np.abs(field.amplitude_position((X, Y), (px, py), z)) ** 2
        if det.d1 is not None:
            dens = convolve_aperture(dens, step, step, det.d1)
        out = {}
        for a in axes:
            c, d = _slice_at_peak(dens, coords, coords, 0 if a == "x" else 1)
            out[a] = ConditionalProfile.from_samples(a + "1", (0.0, 0.0), c, d, plane_z=z)
        return out

    # Fourier plane: work in q-space, then relabel by the lens mapping.
    kwin = moments.default_momentum_window(field) if window is None else window
    if point:
        out = {}
        for a in axes:
            prof = moments.conditional_density_momentum(field, "k" + a, (0.0, 0.0), kwin, 2001)
            xs = det.wavevector_to_position(prof.coords)
            out[a] = ConditionalProfile.from_samples(a + "1_fourier", (0.0, 0.0), xs,
                                                     prof.density)
        return out
    to_q = det.k_det / det.focal_length
    q_r1 = None if det.d1 is None else DetectorAperture(det.d1.diameter * to_q)
    q_r2 = 0.0 if det.d2 is None else 0.5 * det.d2.diameter * to_q
    qstep = step or (q_r1.diameter / 10 if q_r1 is not None else kwin / 200)
    qs = _sym_grid(kwin, qstep)
    KX, KY = np.meshgrid(qs, qs, indexing="ij")
    pts, wts = disk_nodes(q_r2, *quad)
    dens = np.zeros_like(KX)
    for (px, py), wt in zip(pts, wts):
        dens += wt * np.abs(field.amplitude_momentum((KX, KY), (px, py), field.L)) ** 2
    if q_r1 is not None:
        dens = convolve_aperture(dens, qstep, qstep, q_r1)
    out = {}
    for a in axes:
        c, d = _slice_at_peak(dens, qs, qs, 0 if a == "x" else 1)
        out[a] = ConditionalProfile.from_samples(a + "1_fourier", (0.0, 0.0),
                                                 det.wavevector_to_position(c), d)
    return out


def _default_step(det):
    d = min(a.diameter for a in (det.d1, det.d2) if a is not None)
    return d / 10


def _sym_grid(half_width, step):
    m = int(np.ceil(half_width / step))
    return step * np.arange(-m, m + 1)


def write_profile_csv(path, coords, values, axis="x1", units="mm", value_name="counts"):
    """Write a measured or predicted profile in the package's CSV schema."""
    with open(path, "w", newline="") as fh:
        fh.write("# schema=profile version=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{axis}_{units}", value_name])
        for c, v in zip(coords, values):
            w.writerow([f"{c:.12g}", f"{v:.12g}"])


def read_profile_csv(path):
    """Read ``(axis, units, coords, values)`` from a profile CSV."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema=profile"):
            raise ValueError(f"{path}: not a profile CSV (first line {first.strip()!r})")
        rows = list(csv.reader(fh))
    header = rows[0]
    if len(header) != 2 or "_" not in header[0]:
        raise ValueError(f"{path}: header must name '<axis>_<units>,<value>'")
    axis, units = header[0].rsplit("_", 1)
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], float).reshape(-1, 2)
    return axis, units, data[:, 0], data[:, 1]
