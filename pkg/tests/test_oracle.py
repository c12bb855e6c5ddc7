import ast
import pathlib

import numpy as np
import pytest

from epr_spdc import oracle
from epr_spdc.biphoton import BiphotonField, PumpBeam
from epr_spdc.errors import ConvergenceError, DomainError, ResolutionError

from conftest import Z_FACE


def test_erf_oracle_values():
    assert oracle.erf_series_oracle(0.0) == 0
    assert oracle.erf_series_oracle(1.0) == pytest.approx(0.8427007929497149, rel=1e-15)
    assert oracle.erf_series_oracle(2j) == pytest.approx(18.564802414575553j, rel=1e-15)


def test_erf_oracle_domain():
    with pytest.raises(DomainError):
        oracle.erf_series_oracle(6.5)


def test_ei_oracles_agree(rng):
    x = rng.uniform(0.1, 35, 50) * rng.choice([-1, 1], 50)
    np.testing.assert_allclose(oracle.ei_series_oracle(1j * x), oracle.ei_imag_oracle(x),
                               rtol=1e-12)


def test_ei_oracle_domain():
    with pytest.raises(DomainError):
        oracle.ei_series_oracle(0.0)
    with pytest.raises(DomainError):
        oracle.ei_series_oracle(41.0)


def test_oracle_shares_no_kernels():
    src = pathlib.Path(oracle.__file__).read_text()
    imported = set()
    for node in ast.walk(ast.parse(src)):
        if isinstance(node, ast.ImportFrom):
            imported.add(node.module)
            imported.update(a.name for a in node.names)
        elif isinstance(node, ast.Import):
            imported.update(a.name for a in node.names)
    assert not imported & {"specfun", "biphoton", "moments", "crystal"}


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        oracle.GridSpec(1.0, points=100)
    with pytest.raises(ValueError):
        oracle.GridSpec(-1.0)
    g = oracle.GridSpec(2.0, 64)
    assert g.step * g.conjugate_step * g.points == pytest.approx(2 * np.pi)


def test_gaussian_stub_identity(beam1):
    q_grid, _ = oracle.default_grids(beam1)
    assert oracle.gaussian_stub_error(beam1.b1(Z_FACE), q_grid) < 1e-8


def test_gaussian_stub_with_offset(beam1):
    q_grid, _ = oracle.default_grids(beam1)
    shifted = oracle.GridSpec(q_grid.extent, q_grid.points, offset=0.5)
    assert oracle.gaussian_stub_error(beam1.b1(Z_FACE), shifted) < 1e-8


def test_lobe_resolution_check(beam1):
    q_grid, p_grid = oracle.default_grids(beam1)
    coarse = oracle.GridSpec(p_grid.extent * 3, p_grid.points)
    with pytest.raises(ResolutionError):
        oracle.check_lobe_resolution(beam1.lt, beam1.beta_sq, q_grid, coarse)
    oracle.check_lobe_resolution(beam1.lt, beam1.beta_sq, q_grid, p_grid)


def test_thin_crystal_dft_matches(bbo_crystal):
    # without the walk-off and phase-matching sincs both transforms are Gaussian/Fresnel
    f = BiphotonField(bbo_crystal, PumpBeam(355.0, 0.062, 178.0), walk_off=0.0, beta2=0.0)
    q_grid = oracle.GridSpec(9 / f.beam.w0, 512)
    res = oracle.dft_transform_oracle(f, Z_FACE, q_grid=q_grid, p_grid=q_grid, check=False)
    RX, RY = np.meshgrid(res.R, res.R, indexing="ij")
    ref = f.r_factor((RX, RY), Z_FACE)
    assert np.linalg.norm(res.r_field - ref) / np.linalg.norm(ref) < 1e-8


def test_dft_error_halves_when_grid_doubles(beam1):
    q_grid, p_grid = oracle.default_grids(beam1)
    base = oracle.dft_relative_error(beam1, Z_FACE, q_grid, p_grid)
    big = oracle.GridSpec(2 * p_grid.extent, 2 * p_grid.points, p_grid.offset)
    res = oracle.dft_transform_oracle(beam1, Z_FACE, q_grid, big, check=False)
    RX, RY = np.meshgrid(res.R, res.R, indexing="ij")
    SX, SY = np.meshgrid(res.S, res.S, indexing="ij")
    doubled = res.relative_l2(beam1.r_factor((RX, RY), Z_FACE), beam1.s_factor((SX, SY), Z_FACE))
    assert doubled <= 0.5 * base


def test_relative_l2_of_identical_factors():
    a = np.arange(12.0).reshape(3, 4) + 1j
    b = np.ones((2, 2))
    res = oracle.DFTResult(None, None, a, b)
    assert res.relative_l2(a, b) == pytest.approx(0.0, abs=1e-7)
    assert res.relative_l2(a, 2 * b) == pytest.approx(0.5, rel=1e-12)


def test_adaptive_integrate_gaussian_moments():
    def f(t):
        d = np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)
        return np.stack([d, t * d, t * t * d])

    m, err = oracle.adaptive_integrate(f, -12.0, 12.0, tol=1e-12)
    sd = np.sqrt(m[2] / m[0] - (m[1] / m[0]) ** 2)
    assert sd == pytest.approx(1.0, abs=1e-6)
    assert err < 1e-10


def test_adaptive_integrate_budget():
    def f(t):
        return np.stack([np.sin(1 / (t + 1e-9))])

    with pytest.raises(ConvergenceError):
        oracle.adaptive_integrate(f, 0.0, 1.0, tol=1e-14, max_intervals=50)


def test_sech_closed_form():
    assert oracle.sech_std_closed_form(0.1) == pytest.approx(0.1, abs=1e-6)
    assert oracle.sech_std_closed_form(3.0) == pytest.approx(3.0, rel=1e-10)


def test_moment_oracle_beam1_momentum(beam1):
    # two independent integrators on the same slice definition
    ref = oracle.moment_quadrature_oracle(beam1, "kx", (0.0, 0.0))
    assert ref == pytest.approx(6.329327151980893, rel=1e-3)


def test_moment_oracle_axis_validation(beam1):
    with pytest.raises(ValueError):
        oracle.moment_quadrature_oracle(beam1, "z", (0, 0), z=Z_FACE)
    with pytest.raises(ValueError):
        oracle.moment_quadrature_oracle(beam1, "x", (0, 0))


def test_coefficient_oracle_fields(beam1):
    c = oracle.coefficient_oracle(beam1.crystal, beam1.beam, Z_FACE)
    assert c.b1.imag == pytest.approx(-beam1.beam.w0_eff_sq / 4, rel=1e-14)
    assert 0 < c.L_prime < beam1.L


def test_compare_and_report(tmp_path):
    c = oracle.compare("q", 1.0005, 1.0, 1e-3)
    assert c.passed
    assert not oracle.compare("q", 1.01, 1.0, 1e-3).passed
    assert oracle.compare("a", 1e-12, 0.0, 1e-10, absolute=True).passed
    path = tmp_path / "cmp.csv"
    oracle.write_comparison_csv(path, [c])
    lines = path.read_text().splitlines()
    assert lines[0] == "# schema=comparison version=1"
    assert lines[1] == "quantity,main_value,oracle_value,rel_error,tolerance,passed"
    assert lines[2].startswith("q,1.0005,1,")


def test_erf_coefficient_count():
    assert 100 < oracle.erf_coefficient_count() < 200
