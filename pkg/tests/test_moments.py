import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from epr_spdc import oracle
from epr_spdc.biphoton import BiphotonField, PumpBeam
from epr_spdc.errors import PreconditionError, UnreliableMomentError, WindowTooSmallError
from epr_spdc.moments import (
    ConditionalProfile,
    GridConfig,
    UncertaintyResult,
    conditional_density_momentum,
    conditional_density_position,
    default_momentum_window,
    marginal_density_momentum,
    momentum_peak,
    std_dev,
    uncertainties,
)

from conftest import Z_FACE

# Regression baselines (nu = 0, M^2 = 1, default grid, z = 5.0001 mm)
BEAM1 = (0.016333740996220644, 0.014448037566787775, 6.329327151980893, 16.125101490095755)
BEAM8 = (0.014886474301616145, 0.014740757997100418, 4.590765476104123, 7.042191094311538)


@pytest.fixture(scope="module")
def result1(beam1):
    return uncertainties(beam1, z=Z_FACE)


@pytest.fixture(scope="module")
def result8(beam8):
    return uncertainties(beam8, z=Z_FACE)


def gaussian_profile(sigma=1.0, mean=0.0, n=4001, half=10.0):
    x = np.linspace(mean - half * sigma, mean + half * sigma, n)
    return ConditionalProfile.from_samples("x1", (0, 0), x, np.exp(-0.5 * ((x - mean) / sigma) ** 2))


# ---------------------------------------------------------------------------
# profiles and std_dev


def test_profile_normalised():
    p = gaussian_profile(0.3)
    assert np.trapezoid(p.density, p.coords) == pytest.approx(1.0, abs=1e-12)
    assert p.samples.shape == (4001, 2)


@pytest.mark.parametrize(
    "coords, dens",
    [([0, 1, 1, 2], [1, 1, 1, 1]), ([0, 1, 2], [1, -1, 1]), ([0, 1, 2], [1, np.nan, 1])],
)
def test_profile_invariants(coords, dens):
    with pytest.raises(ValueError):
        ConditionalProfile("x1", (0, 0), coords, dens)


def test_std_dev_unit_gaussian():
    assert std_dev(gaussian_profile(1.0)) == pytest.approx(1.0, abs=1e-4)


def test_std_dev_sech():
    sigma0 = 0.1
    x = np.linspace(-2.0, 2.0, 8001)
    p = ConditionalProfile.from_samples("x1", (0, 0), x, 1 / np.cosh(np.pi * x / (2 * sigma0)))
    assert std_dev(p) == pytest.approx(0.1, abs=1e-3)
    assert oracle.sech_std_closed_form(sigma0) == pytest.approx(0.1, rel=1e-10)


def test_std_dev_two_point_mass():
    x = np.linspace(-1, 1, 201)
    d = np.zeros_like(x)
    d[[60, 140]] = 1.0
    a = x[140]
    assert std_dev(ConditionalProfile.from_samples("x1", (0, 0), x, d)) == pytest.approx(a)


def test_std_dev_heavy_tail_rejected():
    x = np.linspace(-5, 5, 1001)
    p = ConditionalProfile.from_samples("x1", (0, 0), x, 1 / (1 + x**2))
    with pytest.raises(UnreliableMomentError):
        std_dev(p)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100), st.floats(-50, 50))
def test_std_dev_shift_scale(sigma, mean):
    assert std_dev(gaussian_profile(sigma, mean)) == pytest.approx(sigma, rel=1e-4)


def test_uncertainty_result_products():
    r = UncertaintyResult(0.01, 0.02, 3.0, 4.0)
    assert r.product_x == 0.01 * 3.0
    assert r.product_y == 0.02 * 4.0
    assert set(r.as_dict()) >= {"dx1_mm", "dky1_per_mm", "product_x", "quad_error"}
    with pytest.raises(ValueError):
        UncertaintyResult(0.0, 0.02, 3.0, 4.0)


# ---------------------------------------------------------------------------
# conditional densities


def test_symmetric_stub_profile_is_even(bbo_crystal):
    f = BiphotonField(bbo_crystal, PumpBeam(355.0, 0.1, 20.0), nu=0.0, walk_off=0.0)
    p = conditional_density_position(f, "x", (0, 0), Z_FACE, 0.5, 2001)
    np.testing.assert_allclose(p.density, p.density[::-1], rtol=1e-12)
    assert abs(p.mean()) < 1e-12


def test_window_too_small(beam1):
    with pytest.raises(WindowTooSmallError):
        conditional_density_position(beam1, "x", (0, 0), Z_FACE, 0.005, 201)
    with pytest.raises(WindowTooSmallError):
        conditional_density_momentum(beam1, "kx", (0, 0), 5.0, 201)


@pytest.mark.parametrize(
    "kwargs",
    [dict(axis="z"), dict(n=10), dict(window=-1.0)],
)
def test_position_profile_bad_arguments(beam1, kwargs):
    args = dict(axis="x", rho2=(0, 0), z=Z_FACE, window=1.0, n=201)
    args.update(kwargs)
    with pytest.raises(ValueError):
        conditional_density_position(beam1, **args)


def test_position_profile_needs_gap(beam1):
    with pytest.raises(PreconditionError):
        conditional_density_position(beam1, "x", (0, 0), beam1.L, 1.0, 201)


def test_y_profile_grid_convergence(beam1):
    a = conditional_density_position(beam1, "y", (0, 0), Z_FACE, 2.0, 80001)
    b = conditional_density_position(beam1, "y", (0, 0), Z_FACE, 2.0, 160001)
    assert std_dev(b) == pytest.approx(std_dev(a), rel=1e-4)


def test_isotropic_momentum_without_walk_off(bbo_crystal):
    f = BiphotonField(bbo_crystal, PumpBeam(355.0, 0.08, 100.0), walk_off=0.0)
    w = default_momentum_window(f)
    px = conditional_density_momentum(f, "kx", (0, 0), w, 2001)
    py = conditional_density_momentum(f, "ky", (0, 0), w, 2001)
    np.testing.assert_allclose(px.density, py.density, rtol=1e-12)


def test_momentum_profile_independent_of_z(beam1):
    w = default_momentum_window(beam1)
    a = conditional_density_momentum(beam1, "ky", (0, 0), w, 2001, z=5.0)
    b = conditional_density_momentum(beam1, "ky", (0, 0), w, 2001, z=300.0)
    np.testing.assert_allclose(a.density, b.density, rtol=1e-12)


def test_marginal_momentum_matches_slice_for_isotropic_gaussian(bbo_crystal):
    # with no walk-off and beta^2 -> 0 the density is a product of Gaussians
    f = BiphotonField(bbo_crystal, PumpBeam(355.0, 0.1, 0.0), walk_off=0.0, beta2=0.0)
    w = default_momentum_window(f)
    m = marginal_density_momentum(f, "kx", (0, 0), w, 801)
    s = conditional_density_momentum(f, "kx", (0, 0), w, 801)
    assert std_dev(m) == pytest.approx(std_dev(s), rel=1e-6)


# ---------------------------------------------------------------------------
# uncertainties


def test_beam1_baseline(result1):
    np.testing.assert_allclose([result1.dx1, result1.dy1, result1.dkx1, result1.dky1], BEAM1,
                               rtol=1e-9)
    assert result1.quad_error < 1e-4


def test_beam8_baseline(result8):
    np.testing.assert_allclose([result8.dx1, result8.dy1, result8.dkx1, result8.dky1], BEAM8,
                               rtol=1e-9)


@pytest.mark.parametrize("axis, index", [("y", 1), ("ky", 3)])
def test_beam1_against_quadrature_oracle(beam1, result1, axis, index):
    ref = oracle.moment_quadrature_oracle(beam1, axis, (0.0, 0.0), z=Z_FACE)
    value = [result1.dx1, result1.dy1, result1.dkx1, result1.dky1][index]
    assert value == pytest.approx(ref, rel=1e-3)


def test_halving_step_changes_little(beam1, result1):
    fine = uncertainties(beam1, z=Z_FACE, grid=GridConfig(position_step=1.25e-5,
                                                          momentum_points=8001))
    for a, b in zip([result1.dx1, result1.dy1, result1.dkx1, result1.dky1],
                    [fine.dx1, fine.dy1, fine.dkx1, fine.dky1]):
        assert b == pytest.approx(a, rel=1e-4)


def test_momentum_uncertainty_decreases_across_table(eight_beam_fields):
    grid = GridConfig()
    dky = []
    for i in range(1, 9):
        f = eight_beam_fields[i]
        w = default_momentum_window(f)
        px = conditional_density_momentum(f, "kx", (0, 0), w, grid.momentum_points)
        peak = momentum_peak(f, (0, 0), f.L, px)
        dky.append(std_dev(conditional_density_momentum(f, "ky", (0, 0), w,
                                                        grid.momentum_points, off_axis=peak)))
    assert all(b < a for a, b in zip(dky, dky[1:]))


def test_isotropic_stub_products_agree(bbo_crystal):
    f = BiphotonField(bbo_crystal, PumpBeam(355.0, 0.5, 0.0), walk_off=0.0)
    r = uncertainties(f, z=Z_FACE)
    assert r.product_x == pytest.approx(r.product_y, rel=1e-6)


def test_uncertainties_require_z(beam1):
    with pytest.raises(ValueError):
        uncertainties(beam1)


def test_marginal_mode_runs(beam1):
    grid = GridConfig(conditioning="marginal", marginal_points=401)
    r = uncertainties(beam1, z=Z_FACE, grid=grid)
    # integrating over the other coordinate can only widen the x profile here
    assert r.dx1 > BEAM1[0]
    assert r.dkx1 == pytest.approx(BEAM1[2], rel=1e-3)


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(conditioning="joint")
    with pytest.raises(ValueError):
        replace(GridConfig(), expand_factor=1.0)
