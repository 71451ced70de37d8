import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgblock.primitive import (FD2, SINC, Geometry, GeometryError, Grid, assemble_primitive,
                               build_grid, diagonal_kernel, fourier_wavenumbers, kinetic_matrix,
                               model_chain, soft_coulomb)


def one_atom(x=0.0):
    return Geometry(np.array([1.0]), np.array([[x]]))


def test_grid_single_atom():
    grid = build_grid(one_atom(), 1.0, 2.0)
    assert grid.n_points == 5
    np.testing.assert_allclose(grid.coords[:, 0], [-2, -1, 0, 1, 2])


def test_grid_two_atoms():
    geom = Geometry(np.ones(2), np.array([[0.0], [1.0]]))
    grid = build_grid(geom, 0.5, 1.0)
    assert grid.n_points == 7
    assert grid.coords[0, 0] == -1.0 and grid.coords[-1, 0] == 2.0


def test_grid_h10_count_by_enumeration():
    geom = Geometry.chain(10, 1.7)
    grid = build_grid(geom, 0.425, 3.4)
    lo = geom.positions.min() - 3.4
    hi = geom.positions.max() + 3.4
    count, x = 0, lo
    while x <= hi + 1e-9:
        count += 1
        x += 0.425
    assert grid.n_points == count


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        build_grid(one_atom(), 0.0, 1.0)
    with pytest.raises(GeometryError):
        build_grid(Geometry(np.zeros(0), np.zeros((0, 1))), 1.0, 1.0)


def test_fd2_two_points():
    h = 0.7
    t = kinetic_matrix(Grid((0.0,), (h,), (2,)), FD2)
    np.testing.assert_allclose(t, [[1 / h**2, -0.5 / h**2], [-0.5 / h**2, 1 / h**2]])


@pytest.mark.parametrize("n", [8, 9, 16])
def test_sinc_spectrum_is_free_particle(n):
    h = 0.3
    t = kinetic_matrix(Grid((0.0,), (h,), (n,), periodic=True), SINC)
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(t)), np.sort(k**2 / 2), atol=1e-10)
    np.testing.assert_allclose(np.sort(fourier_wavenumbers(n, h)), np.sort(k), atol=1e-12)


def test_fd2_converges_to_sinc_on_ring():
    # first excited level of a ring of fixed length; the gap shrinks like h^2
    length = 12.8
    gaps = []
    for n in (64, 128, 256):
        grid = Grid((0.0,), (length / n,), (n,), periodic=True)
        e_fd = np.linalg.eigvalsh(kinetic_matrix(grid, FD2))
        e_sp = np.linalg.eigvalsh(kinetic_matrix(grid, SINC))
        assert abs(e_fd[0] - e_sp[0]) < 1e-10
        gaps.append(abs(e_fd[1] - e_sp[1]))
    assert gaps[0] / gaps[1] == pytest.approx(4, rel=0.05)
    assert gaps[1] / gaps[2] == pytest.approx(4, rel=0.05)


def test_soft_coulomb_values():
    assert soft_coulomb(0.0, 0.5) == pytest.approx(2.0)
    assert soft_coulomb(3.0, 4.0) == pytest.approx(0.2)


def test_kernel_ten_point_chain():
    geom = Geometry.chain(2, 1.0)
    grid = Grid((0.0,), (0.4,), (10,))
    ext, v = diagonal_kernel(grid, geom, 1.0)
    assert np.allclose(v, v.T)
    assert np.all(np.diag(v) == 0)
    off = v[~np.eye(10, dtype=bool)]
    assert off.max() == pytest.approx(1 / np.sqrt(0.4**2 + 1.0))
    _, v_self = diagonal_kernel(grid, geom, 1.0, include_self_term=True)
    np.testing.assert_allclose(np.diag(v_self), 1.0)


def test_free_particle_is_kinetic():
    grid = Grid((0.0,), (0.5,), (12,))
    s = assemble_primitive(grid, Geometry(np.zeros(0), np.zeros((0, 1))))
    np.testing.assert_array_equal(s.h_p, kinetic_matrix(grid, FD2))
    assert s.nuclear_repulsion == 0.0


def test_one_atom_potential_minimum():
    geom = one_atom(0.3)
    grid = build_grid(geom, 0.25, 2.0)
    s = assemble_primitive(grid, geom)
    nearest = int(np.argmin(np.abs(grid.coords[:, 0] - 0.3)))
    assert int(np.argmin(s.external)) == nearest
    assert int(np.argmin(np.diag(s.h_p))) == nearest


def test_mirror_symmetry():
    s = model_chain(3, bond=1.5, spacing=0.25, padding=2.0)
    perm = np.eye(s.n_points)[::-1]
    assert np.max(np.abs(perm @ s.h_p @ perm.T - s.h_p)) < 1e-12
    assert np.max(np.abs(perm @ s.v_p @ perm.T - s.v_p)) < 1e-12


def test_three_dimensional_grid():
    s = model_chain(2, bond=1.4, spacing=0.7, padding=1.4, dim=3)
    assert s.grid.dim == 3
    assert s.h_p.shape == (s.n_points, s.n_points)
    assert np.allclose(s.h_p, s.h_p.T)


def test_geometry_text_round_trip():
    geom = Geometry.chain(3, 1.7)
    again = Geometry.from_text(geom.to_text())
    np.testing.assert_allclose(again.positions, geom.positions)
    np.testing.assert_allclose(again.charges, geom.charges)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 24), h=st.floats(0.05, 2.0), periodic=st.booleans(),
       scheme=st.sampled_from([FD2, SINC]))
def test_kinetic_symmetric_psd(n, h, periodic, scheme):
    t = kinetic_matrix(Grid((0.0,), (h,), (n,), periodic=periodic), scheme)
    assert np.allclose(t, t.T)
    assert np.linalg.eigvalsh(t)[0] > -1e-9 / h**2


@settings(max_examples=30, deadline=None)
@given(d=st.floats(0, 50), a=st.floats(0.1, 5))
def test_kernel_bounded_by_softening(d, a):
    val = soft_coulomb(d, a)
    assert 0 < val <= 1 / a + 1e-12
