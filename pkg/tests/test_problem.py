import math

import numpy as np
import pytest

from rt_dlra.problem import (
    AngularGrid,
    BlockLayout,
    BoundaryCondition,
    ConfigError,
    MaterialField,
    SpatialGrid,
    build_hohlraum,
    build_lattice,
    build_point_source,
    initial_state,
)

GAUSS_PEAK = 39.894228040143268  # 1 / (sqrt(2 pi) * 0.01)


def test_lattice_full_scale_parameters():
    p = build_lattice(252, 252, 252)
    assert p.grid.dx == pytest.approx(1 / 252, rel=1e-15)
    assert p.time_step() == pytest.approx(0.5 / 252, rel=1e-15)
    assert p.f0 == 1e-9


def test_lattice_materials():
    p = build_lattice(14, 14, 8)
    m = p.material
    centre = (7, 7)  # cell (0.5 + dx/2, 0.5 + dy/2) lies in block (4, 4)
    assert (m.Q[centre], m.c_s[centre], m.c_t[centre]) == (1.0, 1.0, 1.0)
    absorber = (2, 2)  # block (2, 2)
    assert (m.c_s[absorber], m.c_t[absorber], m.Q[absorber]) == (0.0, 10.0, 0.0)
    scatterer = (0, 0)
    assert (m.c_s[scatterer], m.c_t[scatterer]) == (1.0, 1.0)
    assert int(np.sum(m.c_t == 10.0)) == 11 * 4
    assert all(p.boundary.side(s).is_zero for s in ("left", "right", "bottom", "top"))


def test_lattice_symmetric_in_x():
    m = build_lattice(28, 28, 8).material
    np.testing.assert_array_equal(m.c_t, m.c_t[::-1])


@pytest.mark.parametrize("builder, n", [(build_lattice, 20), (build_hohlraum, 12)])
def test_misaligned_grid_rejected(builder, n):
    with pytest.raises(ConfigError):
        builder(n, n, 8)


def test_hohlraum():
    p = build_hohlraum(200, 200, 200)
    assert p.grid.dx == pytest.approx(1 / 200)
    inflow = p.inflow("left", np.array([0.3]))
    assert inflow[0, 0] == 1.0
    np.testing.assert_array_equal(inflow[0], p.angles.x_positive.astype(float))
    m = p.material
    assert np.all(m.Q == 0)
    vac = m.c_t == 0
    assert vac.any() and np.all(m.c_s[vac] == 0)
    assert np.all(m.c_t[~vac] == 100.0)
    assert p.boundary.right.is_zero and p.boundary.top.is_zero


def test_point_source_defaults():
    p = build_point_source()
    assert (p.grid.nx, p.grid.ny, p.angles.n_phi) == (600, 600, 200)
    bc = p.boundary.left
    assert (bc.y0, bc.sigma) == (0.85, 0.01)
    assert bc.profile(np.array([0.85]))[0] == pytest.approx(GAUSS_PEAK, rel=1e-15)


def test_point_source_no_inflow_on_outgoing():
    p = build_point_source(20, 20, 8)
    inflow = p.inflow("left", np.array([0.85]))
    k_pi = np.argmin(np.abs(p.angles.phi - math.pi))
    assert inflow[0, k_pi] == 0.0


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_point_source_sigma_positive(sigma):
    with pytest.raises(ConfigError):
        build_point_source(20, 20, 8, sigma=sigma)


@pytest.mark.parametrize("n_phi", [1, 2, 3, 7, 8, 16, 200])
def test_angular_grid(n_phi):
    a = AngularGrid(n_phi)
    assert abs(a.dphi * n_phi - 2 * math.pi) <= 1e-14
    assert np.all(a.x_positive ^ a.x_negative)
    assert np.all(a.y_positive ^ a.y_negative)
    np.testing.assert_array_equal(a.x_positive, (a.phi <= math.pi / 2) | (a.phi >= 1.5 * math.pi))
    np.testing.assert_array_equal(a.y_positive, a.phi <= math.pi)


def test_angular_masks_follow_velocity_sign():
    a = AngularGrid(16)
    assert np.all(a.vx[a.x_positive] > 0) and np.all(a.vx[a.x_negative] < 0)
    assert np.all(a.vy[a.y_positive] > 0) and np.all(a.vy[a.y_negative] < 0)


def test_material_validation():
    z = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        MaterialField(np.ones((2, 2)), z, z)
    with pytest.raises(ConfigError):
        MaterialField(z, z, z, c_adv=0.0)


def test_boundary_validation():
    with pytest.raises(ConfigError):
        BoundaryCondition("gaussian_inflow", sigma=1.0, amplitude=-1.0)
    with pytest.raises(ConfigError):
        BoundaryCondition("reflective")


def test_grid_validation():
    with pytest.raises(ConfigError):
        SpatialGrid(0, 3)


def test_layout_overrides():
    lay = BlockLayout.from_cells(2, 3, "vacuum", {(2, 3): "source"})
    assert lay.kinds[2][1] == "source"
    field = lay.kind_field(4, 6)
    assert field[3, 5] == "source" and field[0, 0] == "vacuum"
    with pytest.raises(ConfigError):
        lay.replace({(3, 1): "absorber"})


def test_boundary_packet_reproduces_inflow():
    p = build_point_source(20, 20, 8)
    s = p.grid.y_centers
    np.testing.assert_allclose(p.boundary_packet("left", s).dense(), p.inflow("left", s),
                               rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("rank", [1, 2, 3, 8])
def test_initial_state(rank):
    p = build_lattice(14, 14, 16)
    st = initial_state(p, rank)
    F = st.dense()
    assert np.abs(F - 1e-9).max() <= 1e-14 * 1e-9
    assert st.orthonormality_error() <= 1e-13
    if rank > 1:
        np.testing.assert_array_equal(st.S[1:], 0.0)
    np.testing.assert_allclose(st.U[:, 0], 1 / 14)
    np.testing.assert_allclose(st.V[:, 0], 0.25)


def test_initial_state_16_cube():
    p = build_from_16()
    F = initial_state(p, 4).dense()
    assert np.abs(F - p.f0).max() <= 1e-14 * p.f0


def build_from_16():
    from rt_dlra.problem import LATTICE_MATERIALS, build_from_layout
    return build_from_layout("t", 16, 16, 16, BlockLayout.from_cells(1, 1, "scatterer", {}),
                             LATTICE_MATERIALS)


@pytest.mark.parametrize("rank", [0, 17])
def test_initial_state_rank_range(rank):
    with pytest.raises(ValueError):
        initial_state(build_from_16(), rank)
