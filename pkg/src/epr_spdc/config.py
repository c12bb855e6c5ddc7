"""Run configuration: an INI file with named sections.

Every parse or validation failure raises ``ConfigError`` carrying the line
number of the offending key (or section) so messages can point at the file.
"""

import configparser
import io
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .crystal import BBO, CrystalParams, Sellmeier
from .errors import ConfigError
from .biphoton import M2_MODES, BiphotonField, PumpBeam, nu_from_wavelengths
from .instrument import DetectorAperture, Detectors
from .moments import CONDITIONING_MODES, GridConfig

ENERGY_TOL = 1e-3
MATERIALS = {"BBO": BBO}


@dataclass(frozen=True)
class BeamSpec:
    beam_id: int
    w0: float
    z_c: float


@dataclass(frozen=True)
class RunConfig:
    # crystal
    material: str = "BBO"
    L: float = 5.0
    theta_deg: float = None
    sellmeier_o: tuple = None
    sellmeier_e: tuple = None
    # pump
    lambda_p: float = 355.0
    m2: float = 1.0
    m2_mode: str = "rayleigh"
    beams: tuple = ()
    # photons
    lambda1: float = 690.0
    lambda2: float = 731.0
    nu_override: float = None
    # detector
    d1: float = 0.050
    d2: float = 0.050
    focal_length: float = 75.0
    plane: str = "image"
    # numerics
    z: float = 5.0001
    position_window: float = 2.0
    position_step: float = 2.5e-5
    momentum_points: int = 4001
    boundary_tol: float = 1e-6
    conditioning: str = "slice"
    dft_points: int = 512
    dft_tolerance: float = 1e-3
    oracle_tolerance: float = 1e-3
    jobs: int = 1
    # zsweep
    sweep_beam: int = None
    sweep_gap_min: float = 1e-4
    sweep_gap_max: float = 5.0
    sweep_points: int = 21
    sweep_spacing: str = "log"
    # output
    output_dir: str = "out"
    lines: dict = field(default=None, compare=False, repr=False)

    # -- derived objects ----------------------------------------------------

    @property
    def nu(self):
        if self.nu_override is not None:
            return self.nu_override
        return nu_from_wavelengths(self.lambda1, self.lambda2)

    def sellmeier(self):
        base = MATERIALS[self.material]
        return Sellmeier(
            self.sellmeier_o or base.ordinary,
            self.sellmeier_e or base.extraordinary,
            base.window_um,
            self.material,
        )

    def crystal(self):
        theta = None if self.theta_deg is None else np.deg2rad(self.theta_deg)
        return CrystalParams.from_sellmeier(self.sellmeier(), self.L, self.lambda_p, theta)

    def pump(self, beam):
        return PumpBeam(self.lambda_p, beam.w0, beam.z_c, self.m2, 1.0, self.m2_mode)

    def field(self, beam, crystal=None):
        crystal = self.crystal() if crystal is None else crystal
        return BiphotonField(crystal, self.pump(beam), self.nu)

    def grid(self):
        return GridConfig(
            position_window=self.position_window,
            position_step=self.position_step,
            momentum_points=self.momentum_points,
            boundary_tol=self.boundary_tol,
            conditioning=self.conditioning,
        )

    def detectors(self):
        return Detectors(
            DetectorAperture(self.d1) if self.d1 > 0 else None,
            DetectorAperture(self.d2) if self.d2 > 0 else None,
            self.focal_length,
            self.lambda1,
        )

    def beam(self, beam_id):
        for b in self.beams:
            if b.beam_id == beam_id:
                return b
        raise ConfigError(f"no beam with id {beam_id}", self._line("pump", "beams"), "beams")

    def sweep_z(self):
        if self.sweep_points == 0:
            return np.array([])
        if self.sweep_spacing == "log":
            gaps = np.geomspace(self.sweep_gap_min, self.sweep_gap_max, self.sweep_points)
        else:
            gaps = np.linspace(self.sweep_gap_min, self.sweep_gap_max, self.sweep_points)
        return self.L + gaps

    def _line(self, section, key=None):
        if not self.lines:
            return None
        return self.lines.get((section, key)) or self.lines.get((section, None))


# key -> (section, attribute, parser)
def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _floats(s):
    vals = tuple(float(v) for v in re.split(r"[,\s]+", s.strip()) if v)
    if len(vals) != 4:
        raise ValueError("expected four comma-separated coefficients")
    return vals


def _opt_float(s):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _opt_int(s):
    return None if s.strip().lower() in ("", "none", "auto") else int(s)


_SCHEMA = {
    "crystal": {
        "material": ("material", str.strip),
        "length_mm": ("L", _float),
        "theta_deg": ("theta_deg", _opt_float),
        "sellmeier_o": ("sellmeier_o", _floats),
        "sellmeier_e": ("sellmeier_e", _floats),
    },
    "pump": {
        "lambda_nm": ("lambda_p", _float),
        "m2": ("m2", _float),
        "m2_mode": ("m2_mode", str.strip),
        "beams": ("beams", None),
    },
    "photons": {
        "lambda1_nm": ("lambda1", _float),
        "lambda2_nm": ("lambda2", _float),
        "nu": ("nu_override", _opt_float),
    },
    "detector": {
        "d1_mm": ("d1", _float),
        "d2_mm": ("d2", _float),
        "focal_length_mm": ("focal_length", _float),
        "plane": ("plane", str.strip),
    },
    "numerics": {
        "z_mm": ("z", _float),
        "position_window_mm": ("position_window", _float),
        "position_step_mm": ("position_step", _float),
        "momentum_points": ("momentum_points", _int),
        "boundary_tol": ("boundary_tol", _float),
        "conditioning": ("conditioning", str.strip),
        "dft_points": ("dft_points", _int),
        "dft_tolerance": ("dft_tolerance", _float),
        "oracle_tolerance": ("oracle_tolerance", _float),
        "jobs": ("jobs", _int),
    },
    "zsweep": {
        "beam": ("sweep_beam", _opt_int),
        "gap_min_mm": ("sweep_gap_min", _float),
        "gap_max_mm": ("sweep_gap_max", _float),
        "points": ("sweep_points", _int),
        "spacing": ("sweep_spacing", str.strip),
    },
    "output": {
        "directory": ("output_dir", str.strip),
    },
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^([A-Za-z0-9_]+)\s*[=:]")


def _line_index(text):
    """Map ``(section, key)`` to the 1-based line where the key starts."""
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = _KEY_RE.match(raw)
        if m and section is not None:
            lines[(section, m.group(1).lower())] = no
    return lines


def _parse_beams(value, first_line, text_lines=()):
    beams = []
    cursor = (first_line or 1) - 1
    for row in value.splitlines():
        row = row.split("#", 1)[0].strip()
        if not row:
            continue
        line = None
        # locate the row in the source (configparser drops comment lines)
        for idx in range(cursor, len(text_lines)):
            if row in text_lines[idx]:
                line, cursor = idx + 1, idx + 1
                break
        parts = row.replace(":", " ").replace(",", " ").split()
        if len(parts) != 3:
            raise ConfigError(f"beam row {row!r} must be '<id> <w0_mm> <z_c_mm>'", line, "beams")
        try:
            beams.append(BeamSpec(int(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ConfigError(f"beam row {row!r}: {exc}", line, "beams") from None
        if not beams[-1].w0 > 0:
            raise ConfigError(f"beam {parts[0]}: w0 must be > 0, got {parts[1]}", line, "w0")
    return tuple(beams)


def parse_config(text):
    """Parse configuration text into a validated ``RunConfig``."""
    lines = _line_index(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None

    values = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)), section)
        for key, raw in cp.items(section):
            line = lines.get((section, key))
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", line, key)
            attr, parser = _SCHEMA[section][key]
            if attr == "beams":
                values[attr] = _parse_beams(raw, line, text.splitlines())
                continue
            try:
                values[attr] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})", line, key) from None
    cfg = RunConfig(**values, lines=lines)
    validate(cfg)
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _positive(cfg, attr, section, key):
    if not getattr(cfg, attr) > 0:
        raise ConfigError(
            f"{key} must be > 0, got {getattr(cfg, attr)}", cfg._line(section, key), key
        )


def validate(cfg):
    """Bounds and consistency checks; raises ``ConfigError`` naming the field."""
    if cfg.material not in MATERIALS:
        raise ConfigError(
            f"unknown material {cfg.material!r} (known: {', '.join(MATERIALS)})",
            cfg._line("crystal", "material"), "material",
        )
    for attr, section, key in [
        ("L", "crystal", "length_mm"), ("lambda_p", "pump", "lambda_nm"),
        ("lambda1", "photons", "lambda1_nm"), ("lambda2", "photons", "lambda2_nm"),
        ("focal_length", "detector", "focal_length_mm"), ("position_window", "numerics",
        "position_window_mm"), ("position_step", "numerics", "position_step_mm"),
        ("boundary_tol", "numerics", "boundary_tol"), ("dft_tolerance", "numerics",
        "dft_tolerance"), ("oracle_tolerance", "numerics", "oracle_tolerance"),
        ("sweep_gap_min", "zsweep", "gap_min_mm"), ("sweep_gap_max", "zsweep", "gap_max_mm"),
        ("jobs", "numerics", "jobs"),
    ]:
        _positive(cfg, attr, section, key)
    for attr, key in [("d1", "d1_mm"), ("d2", "d2_mm")]:
        if getattr(cfg, attr) < 0:
            raise ConfigError(f"{key} must be >= 0", cfg._line("detector", key), key)
    if not cfg.m2 >= 1:
        raise ConfigError(f"m2 must be >= 1, got {cfg.m2}", cfg._line("pump", "m2"), "m2")
    if cfg.m2_mode not in M2_MODES:
        raise ConfigError(f"m2_mode must be one of {M2_MODES}", cfg._line("pump", "m2_mode"),
                          "m2_mode")
    if cfg.plane not in ("image", "fourier"):
        raise ConfigError("plane must be 'image' or 'fourier'", cfg._line("detector", "plane"),
                          "plane")
    if cfg.conditioning not in CONDITIONING_MODES:
        raise ConfigError(f"conditioning must be one of {CONDITIONING_MODES}",
                          cfg._line("numerics", "conditioning"), "conditioning")
    if cfg.sweep_spacing not in ("log", "linear"):
        raise ConfigError("spacing must be 'log' or 'linear'", cfg._line("zsweep", "spacing"),
                          "spacing")
    if cfg.sweep_points < 0:
        raise ConfigError("points must be >= 0", cfg._line("zsweep", "points"), "points")
    if cfg.momentum_points < 64:
        raise ConfigError("momentum_points must be >= 64", cfg._line("numerics",
                          "momentum_points"), "momentum_points")
    if cfg.dft_points < 64 or cfg.dft_points & (cfg.dft_points - 1):
        raise ConfigError("dft_points must be a power of two >= 64",
                          cfg._line("numerics", "dft_points"), "dft_points")
    if cfg.z <= cfg.L:
        raise ConfigError(f"z_mm must exceed the crystal length {cfg.L}",
                          cfg._line("numerics", "z_mm"), "z_mm")
    if cfg.theta_deg is not None and not 0 <= cfg.theta_deg <= 90:
        raise ConfigError("theta_deg must lie in [0, 90]", cfg._line("crystal", "theta_deg"),
                          "theta_deg")
    lhs = 1 / cfg.lambda1 + 1 / cfg.lambda2
    rhs = 1 / cfg.lambda_p
    if abs(lhs - rhs) / rhs > ENERGY_TOL:
        raise ConfigError(
            f"energy conservation violated: 1/lambda1 + 1/lambda2 differs from 1/lambda_p "
            f"by {abs(lhs - rhs) / rhs:.2e} (relative)",
            cfg._line("photons", "lambda2_nm") or cfg._line("photons"), "lambda2_nm",
        )
    if cfg.nu_override is not None and abs(cfg.nu_override) > 0.1:
        raise ConfigError("nu must satisfy |nu| <= 0.1", cfg._line("photons", "nu"), "nu")
    ids = [b.beam_id for b in cfg.beams]
    if len(set(ids)) != len(ids):
        raise ConfigError("beam ids must be unique", cfg._line("pump", "beams"), "beams")
    if cfg.sweep_beam is not None and cfg.sweep_beam not in ids:
        raise ConfigError(f"zsweep beam {cfg.sweep_beam} is not listed under [pump] beams",
                          cfg._line("zsweep", "beam"), "beam")
    return cfg


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def dump_config(cfg):
    """Serialise ``cfg``; ``parse_config(dump_config(cfg)) == cfg``."""
    inverse = {}
    for section, keys in _SCHEMA.items():
        for key, (attr, _) in keys.items():
            inverse[attr] = (section, key)
    out = io.StringIO()
    by_section = {s: [] for s in _SCHEMA}
    for f in fields(RunConfig):
        if f.name == "lines":
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        section, key = inverse[f.name]
        if f.name == "beams":
            rows = "".join(f"\n    {b.beam_id} {_fmt(b.w0)} {_fmt(b.z_c)}" for b in value)
            by_section[section].append(f"{key} ={rows}")
        elif f.name in ("sellmeier_o", "sellmeier_e"):
            by_section[section].append(f"{key} = {', '.join(_fmt(v) for v in value)}")
        else:
            by_section[section].append(f"{key} = {_fmt(value)}")
    for section, rows in by_section.items():
        if rows:
            out.write(f"[{section}]\n" + "\n".join(rows) + "\n\n")
    return out.getvalue()


def with_overrides(cfg, **changes):
    new = replace(cfg, **changes)
    validate(new)
    return new
