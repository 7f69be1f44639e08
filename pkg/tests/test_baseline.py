import math

import numpy as np
import pytest

from rt_dlra.baseline import (
    classic_step,
    dense_initial,
    full_tensor_step,
    relative_error,
    total_mass,
)
from rt_dlra.decomposition import SubdomainState, Topology, dd_step
from rt_dlra.problem import (
    HOHLRAUM_MATERIALS,
    BlockLayout,
    BoundaryCondition,
    PhysicalBoundarySpec,
    build_from_layout,
    build_hohlraum,
    initial_state,
)


def uniform(kind, n=12, n_phi=8, boundary=None, f0=1e-9):
    lay = BlockLayout.from_cells(1, 1, kind, {})
    return build_from_layout("u", n, n, n_phi, lay, HOHLRAUM_MATERIALS, boundary, f0)


def test_classic_vacuum_unchanged():
    p = uniform("vacuum", f0=0.0)
    st0 = initial_state(p, 1)
    st1, rt = classic_step(st0, p, p.time_step(), 1e-6)
    assert np.all(st1.dense() == 0.0) and rt == 1


@pytest.mark.parametrize("self_augment", [False, True])
def test_classic_is_dd_on_one_block(self_augment):
    p = build_hohlraum(20, 20, 8)
    topo = Topology(p.grid, 1, 1)
    cl = initial_state(p, 1)
    dd = [SubdomainState.wrap(0, cl)]
    for i in range(5):
        cl, _ = classic_step(cl, p, p.time_step(), 1e-4, step=i, self_augment=self_augment)
        dd, _ = dd_step(dd, p, topo, p.time_step(), 1e-4, step=i, self_augment=self_augment)
        assert np.abs(cl.dense() - dd[0].lr.dense()).max() <= 1e-12


def test_classic_rank_grows_without_inflow():
    from rt_dlra.problem import build_lattice
    p = build_lattice(14, 14, 16)
    st0 = initial_state(p, 1)
    for i in range(6):
        st0, rt = classic_step(st0, p, p.time_step(), 1e-8, step=i)
    assert st0.rank > 1


def test_full_tensor_constant_state():
    c = 0.7
    side = BoundaryCondition("constant_inflow", value=c)
    p = uniform("vacuum", boundary=PhysicalBoundarySpec(side, side, side, side), f0=c)
    f = full_tensor_step(dense_initial(p), p, p.time_step())
    assert np.abs(f - c).max() <= 1e-15


def test_full_tensor_absorber_decay():
    p = uniform("absorber", n=16)
    dt = p.time_step()
    f = full_tensor_step(dense_initial(p), p, dt)
    centre = f.reshape(16, 16, 8)[6:10, 6:10]
    z = 100.0 * dt
    r4 = 1 - z + z ** 2 / 2 - z ** 3 / 6 + z ** 4 / 24
    np.testing.assert_allclose(centre, 1e-9 * r4, rtol=1e-13)
    assert abs(r4 - math.exp(-z)) <= z ** 5 / 120


def test_full_tensor_outflow_bookkeeping():
    p = uniform("vacuum", n=16, f0=0.0)
    g, a = p.grid, p.angles
    x = g.x_centers
    bump = np.exp(-((x[:, None] - 0.6) ** 2 + (x[None, :] - 0.5) ** 2) / 0.01).ravel()
    f = np.outer(bump, a.x_positive.astype(float))
    m0 = total_mass(f, g.dx, g.dy, a.dphi)
    lost = []
    for _ in range(24):
        f = full_tensor_step(f, p, p.time_step(), outflow=lost)
    m1 = total_mass(f, g.dx, g.dy, a.dphi)
    assert sum(lost) > 0.1 * m0
    assert abs(m1 + sum(lost) - m0) <= 1e-10 * m0


def test_full_tensor_inflow_counts_negative():
    side = BoundaryCondition("constant_inflow", value=1.0)
    p = uniform("vacuum", f0=0.0, boundary=PhysicalBoundarySpec(left=side))
    lost = []
    f = full_tensor_step(dense_initial(p), p, p.time_step(), outflow=lost)
    assert lost[0] < 0
    g, a = p.grid, p.angles
    assert total_mass(f, g.dx, g.dy, a.dphi) == pytest.approx(-lost[0], rel=1e-12)


def test_full_tensor_memory_guard():
    p = uniform("vacuum", n=2000, n_phi=32)
    with pytest.raises(MemoryError):
        full_tensor_step(np.zeros((1, 1)), p, 1e-3)


def test_full_tensor_shape_check():
    p = uniform("vacuum")
    with pytest.raises(ValueError):
        full_tensor_step(np.zeros((3, 3)), p, 0.01)


def test_relative_error_examples(rng):
    f = rng.standard_normal((20, 8))
    assert relative_error(f, f, 0.1, 0.2, 0.3) == 0.0
    assert relative_error(f + 0.25, f, 0.1, 0.2, 0.3) == pytest.approx(0.25, rel=1e-13)
    with pytest.raises(ValueError):
        relative_error(f, f[:10], 1, 1, 1)


def test_relative_error_unit_square_norm():
    # ||1|| over [0,1]^2 x [0, 2 pi) is sqrt(2 pi)
    n, n_phi = 4, 8
    ones = np.ones((n * n, n_phi))
    num = relative_error(ones, 0 * ones, 1 / n, 1 / n, 2 * math.pi / n_phi)
    assert num == pytest.approx(1.0)


def test_relative_error_triangle(rng):
    for _ in range(20):
        a, b, c = (rng.standard_normal((12, 6)) for _ in range(3))
        d = lambda u, v: relative_error(u, v, 0.5, 0.5, 1.0)  # noqa: E731
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-15
        assert d(a, b) == pytest.approx(d(b, a))
