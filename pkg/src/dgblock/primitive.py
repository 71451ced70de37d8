"""Desk-scale model systems in a diagonal primitive (grid) basis.

The primitive Hamiltonian has the form

    H = sum_{mu,nu} h_p[mu, nu] b+_mu b_nu + 1/2 sum_{mu,nu} v_p[mu, nu] n_mu n_nu

with a uniform real-space grid, a softened Coulomb kernel 1/sqrt(d^2 + a^2)
and either a second-order finite-difference or a periodic-sinc kinetic
operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FD2 = "fd2"
SINC = "sinc"
KINETIC_SCHEMES = (FD2, SINC)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    """Point nuclei with positive charges.

    ``positions`` has shape (n_atoms, dim) with dim 1 or 3, in bohr.
    ``softening`` is the kernel parameter used for the nuclear repulsion.
    """

    charges: np.ndarray
    positions: np.ndarray
    softening: float = 1.0

    def __post_init__(self):
        charges = np.asarray(self.charges, dtype=float).reshape(-1)
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim == 1:
            positions = positions.reshape(-1, 1)
        if positions.shape[0] != charges.shape[0]:
            raise GeometryError("charges and positions disagree in length")
        if positions.size and positions.shape[1] not in (1, 3):
            raise GeometryError("positions must be 1D or 3D")
        if np.any(charges <= 0):
            raise GeometryError("all charges must be positive")
        if self.softening <= 0:
            raise GeometryError("softening must be positive")
        for i in range(len(charges)):
            for j in range(i):
                if np.allclose(positions[i], positions[j], atol=1e-12):
                    raise GeometryError(f"atoms {j} and {i} coincide")
        object.__setattr__(self, "charges", charges)
        object.__setattr__(self, "positions", positions)

    @property
    def n_atoms(self) -> int:
        return len(self.charges)

    @property
    def dim(self) -> int:
        return self.positions.shape[1] if self.n_atoms else 1

    @property
    def nuclear_repulsion(self) -> float:
        e = 0.0
        for i in range(self.n_atoms):
            for j in range(i):
                d = np.linalg.norm(self.positions[i] - self.positions[j])
                e += self.charges[i] * self.charges[j] * soft_coulomb(d, self.softening)
        return float(e)

    @classmethod
    def chain(cls, n_atoms: int, bond: float, dim: int = 1, charge: float = 1.0,
              softening: float = 1.0) -> "Geometry":
        """Equally spaced chain starting at the origin (along x in 1D, z in 3D)."""
        pos = np.zeros((n_atoms, dim))
        axis = 0 if dim == 1 else 2
        pos[:, axis] = bond * np.arange(n_atoms)
        return cls(np.full(n_atoms, charge), pos, softening)

    @classmethod
    def from_text(cls, text: str, softening: float = 1.0) -> "Geometry":
        """Parse lines of ``Z x [y z]`` (bohr); ``#`` starts a comment."""
        charges, positions = [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 4):
                raise GeometryError(f"line {lineno}: expected 'Z x' or 'Z x y z'")
            charges.append(float(parts[0]))
            positions.append([float(p) for p in parts[1:]])
        if len({len(p) for p in positions}) > 1:
            raise GeometryError("mixed 1D and 3D coordinates")
        return cls(np.array(charges), np.array(positions).reshape(len(charges), -1), softening)

    def to_text(self) -> str:
        lines = []
        for z, r in zip(self.charges, self.positions):
            lines.append(" ".join([repr(float(z))] + [repr(float(x)) for x in r]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Grid:
    """Uniform grid; points are ordered with the last axis slowest.

    In 1D the single axis is x. In 3D the flat index is
    ``(iz * ny + iy) * nx + ix`` so that slabs along z are contiguous.
    """

    origin: tuple
    spacing: tuple
    extents: tuple
    periodic: bool = False

    def __post_init__(self):
        if len(self.extents) not in (1, 3):
            raise ValueError("grid dimension must be 1 or 3")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("spacing must be positive")
        if any(n < 1 for n in self.extents):
            raise ValueError("extents must be positive")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.extents))

    @property
    def lengths(self) -> np.ndarray:
        return np.array(self.spacing) * np.array(self.extents)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.extents[axis])

    @property
    def coords(self) -> np.ndarray:
        """(N_p, dim) array of point positions in flat-index order."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes[::-1], indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh[::-1]], axis=1)

    def axis_index(self, axis: int) -> np.ndarray:
        """Integer coordinate along ``axis`` for every flat index."""
        idx = np.arange(self.n_points)
        for a in range(axis):
            idx = idx // self.extents[a]
        return idx % self.extents[axis]

    def displacements(self, points: np.ndarray) -> np.ndarray:
        """Displacements grid_point - point, shape (N_p, len(points), dim).

        Minimum-image convention on periodic grids.
        """
        d = self.coords[:, None, :] - np.asarray(points, dtype=float)[None, :, :]
        if self.periodic:
            box = self.lengths
            d = d - box * np.round(d / box)
        return d


def build_grid(geometry: Geometry, spacing: float, padding: float,
               periodic: bool = False) -> Grid:
    """Grid covering the atoms' bounding box extended by ``padding``."""
    if geometry.n_atoms == 0:
        raise GeometryError("empty geometry")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if padding < 0:
        raise ValueError("padding must be non-negative")
    lo = geometry.positions.min(axis=0) - padding
    hi = geometry.positions.max(axis=0) + padding
    extents = tuple(int(math.ceil((h - l) / spacing - 1e-9)) + 1 for l, h in zip(lo, hi))
    return Grid(tuple(float(x) for x in lo), (float(spacing),) * len(extents), extents, periodic)


def _fd2_1d(n: int, h: float, periodic: bool) -> np.ndarray:
    t = np.zeros((n, n))
    idx = np.arange(n)
    t[idx, idx] = 1.0 / h**2
    t[idx[:-1], idx[:-1] + 1] = -0.5 / h**2
    t[idx[:-1] + 1, idx[:-1]] = -0.5 / h**2
    if periodic and n > 2:
        t[0, n - 1] = t[n - 1, 0] = -0.5 / h**2
    elif periodic and n == 2:
        t[0, 1] = t[1, 0] = -1.0 / h**2
    return t


def fourier_wavenumbers(n: int, h: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=h)


def _sinc_1d(n: int, h: float) -> np.ndarray:
    k = fourier_wavenumbers(n, h)
    x = h * np.arange(n)
    phase = np.exp(1j * np.outer(x, k))
    t = (phase * (0.5 * k**2)) @ phase.conj().T / n
    t = t.real
    return 0.5 * (t + t.T)


def kinetic_matrix(grid: Grid, scheme: str) -> np.ndarray:
    """-laplacian/2 on the grid, summed over axes (Kronecker sum)."""
    if scheme == FD2:
        blocks = [_fd2_1d(n, h, grid.periodic) for n, h in zip(grid.extents, grid.spacing)]
    elif scheme == SINC:
        blocks = [_sinc_1d(n, h) for n, h in zip(grid.extents, grid.spacing)]
    else:
        raise ValueError(f"unknown kinetic scheme {scheme!r}")
    # flat index has axis 0 fastest, so the Kronecker order is reversed
    total = np.zeros((grid.n_points, grid.n_points))
    for axis, block in enumerate(blocks):
        term = np.ones((1, 1))
        for a in reversed(range(grid.dim)):
            term = np.kron(term, block if a == axis else np.eye(grid.extents[a]))
        total += term
    return total


def soft_coulomb(d, a: float):
    return 1.0 / np.sqrt(np.square(d) + a * a)


def diagonal_kernel(grid: Grid, geometry: Geometry, a: float,
                    include_self_term: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Return (external potential per point, two-body kernel matrix)."""
    if a <= 0:
        raise ValueError("softening a must be positive")
    coords = grid.coords
    dist = np.linalg.norm(grid.displacements(coords), axis=2)
    v = soft_coulomb(dist, a)
    v = 0.5 * (v + v.T)
    if not include_self_term:
        np.fill_diagonal(v, 0.0)
    external = np.zeros(grid.n_points)
    if geometry.n_atoms:
        pos = geometry.positions
        if pos.shape[1] != grid.dim:
            raise GeometryError("geometry and grid dimensions differ")
        r = np.linalg.norm(grid.displacements(pos), axis=2)
        external = -(soft_coulomb(r, a) * geometry.charges[None, :]).sum(axis=1)
    return external, v


@dataclass(frozen=True)
class PrimitiveSystem:
    grid: Grid
    geometry: Geometry
    h_p: np.ndarray
    v_p: np.ndarray
    kinetic_scheme: str
    softening: float
    include_self_term: bool
    external: np.ndarray = field(repr=False, default=None)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    @property
    def nuclear_repulsion(self) -> float:
        return self.geometry.nuclear_repulsion

    @property
    def one_body(self) -> np.ndarray:
        """One-body matrix of the normal-ordered Hamiltonian.

        Normal ordering 1/2 v n_mu n_mu produces 1/2 v_p[mu, mu] n_mu, which is
        folded in here; it vanishes when the self term is excluded.
        """
        return self.h_p + 0.5 * np.diag(np.diag(self.v_p))


def default_scheme(grid: Grid) -> str:
    return SINC if grid.periodic else FD2


def assemble_primitive(grid: Grid, geometry: Geometry, scheme: str | None = None,
                       a: float = 1.0, include_self_term: bool = False) -> PrimitiveSystem:
    scheme = scheme or default_scheme(grid)
    t = kinetic_matrix(grid, scheme)
    external, v = diagonal_kernel(grid, geometry, a, include_self_term)
    h = t + np.diag(external)
    h = 0.5 * (h + h.T)
    if geometry.n_atoms and not math.isclose(geometry.softening, a):
        geometry = Geometry(geometry.charges, geometry.positions, a)
    return PrimitiveSystem(grid, geometry, h, v, scheme, a, include_self_term, external)


def model_chain(n_atoms: int, bond: float = 1.7, spacing: float = 0.2125, padding: float = 3.4,
                a: float = 1.0, scheme: str | None = None, include_self_term: bool = False,
                dim: int = 1) -> PrimitiveSystem:
    """Hydrogen-like chain on a 1D (or 3D) grid."""
    geom = Geometry.chain(n_atoms, bond, dim=dim, softening=a)
    grid = build_grid(geom, spacing, padding)
    return assemble_primitive(grid, geom, scheme, a, include_self_term)
