"""Active-space orbitals expanded in the primitive grid basis.

Gaussian shells are point-sampled on the grid, orthonormalized, and combined
with a mean-field density into a hybrid density whose leading natural
orbitals define the active space. ``project_active_hamiltonian`` gives the
dense reference Hamiltonian in that space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .primitive import Geometry, Grid, PrimitiveSystem

log = logging.getLogger(__name__)

GAUSSIAN_SHELL = "gaussian-shell"
CANONICAL_MO = "canonical-mo"
NATURAL_ORBITAL = "natural-orbital"

DEFAULT_EXPONENTS = (0.5, 1.5)


class SingularGramError(np.linalg.LinAlgError):
    pass


class SCFConvergenceError(RuntimeError):
    def __init__(self, energy, delta, n_iter):
        super().__init__(f"SCF not converged after {n_iter} iterations "
                         f"(last energy {energy:.12f}, max |dD| {delta:.3e})")
        self.energy = energy
        self.delta = delta


@dataclass(frozen=True)
class Shell:
    center: int
    exponent: float
    kind: str = "s"  # "s", or "px"/"py"/"pz"


@dataclass
class OrbitalSet:
    phi: np.ndarray
    labels: list = field(default_factory=list)

    @property
    def n_active(self) -> int:
        return self.phi.shape[1]

    @property
    def n_points(self) -> int:
        return self.phi.shape[0]


@dataclass
class DensityMatrix:
    D: np.ndarray
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None

    @property
    def trace(self) -> float:
        return float(np.trace(self.D))


@dataclass
class ActiveHamiltonian:
    """h_a and v_a with v_a[p, q, r, s] multiplying a+_p a+_q a_r a_s."""

    h_a: np.ndarray
    v_a: np.ndarray
    core_energy: float

    @property
    def n_active(self) -> int:
        return self.h_a.shape[0]


def default_shells(geometry: Geometry, exponents=DEFAULT_EXPONENTS) -> list[Shell]:
    return [Shell(i, z) for i in range(geometry.n_atoms) for z in exponents]


def sample_gaussians(grid: Grid, geometry: Geometry, shells) -> np.ndarray:
    """Point-sample unnormalized Gaussians; one column per shell."""
    raw = np.empty((grid.n_points, len(shells)))
    for col, shell in enumerate(shells):
        if shell.exponent <= 0:
            raise ValueError(f"shell {col}: exponent must be positive")
        if not 0 <= shell.center < geometry.n_atoms:
            raise ValueError(f"shell {col}: center {shell.center} is not an atom")
        d = grid.displacements(geometry.positions[shell.center:shell.center + 1])[:, 0, :]
        g = np.exp(-shell.exponent * np.sum(d * d, axis=1))
        if shell.kind != "s":
            axis = "xyz".index(shell.kind[-1])
            if axis >= grid.dim:
                raise ValueError(f"shell {col}: {shell.kind} on a {grid.dim}D grid")
            g = g * d[:, axis]
        raw[:, col] = g
    return raw


def lowdin_orthonormalize(raw: np.ndarray, threshold: float = 1e-10,
                          label: str = GAUSSIAN_SHELL) -> OrbitalSet:
    s = raw.T @ raw
    w, v = np.linalg.eigh(0.5 * (s + s.T))
    bad = w[w < threshold]
    if bad.size:
        raise SingularGramError(f"Gram matrix numerically singular; smallest eigenvalues {bad.tolist()}")
    s_inv_half = (v / np.sqrt(w)) @ v.T
    return OrbitalSet(raw @ s_inv_half, [label] * raw.shape[1])


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive."""
    if vecs.size == 0:
        return vecs
    rows = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[rows, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _coulomb_exchange(v: np.ndarray, d_total: np.ndarray, d_spin: np.ndarray):
    j = v @ np.diag(d_total)  # Hartree potential per point
    k = v * d_spin
    return j, k


def _aufbau(f: np.ndarray, n_occ: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    eps, c = np.linalg.eigh(f)
    c = _fix_signs(c)
    occ = c[:, :n_occ]
    return occ @ occ.T, eps, c


@dataclass
class SCFResult:
    energy: float
    orbitals: OrbitalSet
    density: DensityMatrix
    energies: list
    n_iter: int
    orbital_energies: np.ndarray


def scf_energy(system: PrimitiveSystem, d_alpha: np.ndarray, d_beta: np.ndarray) -> float:
    h = system.one_body
    v = system.v_p
    d = d_alpha + d_beta
    e1 = np.sum(h * d)
    coul = 0.5 * np.diag(d) @ v @ np.diag(d)
    exch = 0.5 * (np.sum(v * d_alpha * d_alpha) + np.sum(v * d_beta * d_beta))
    return float(e1 + coul - exch + system.nuclear_repulsion)


def scf_mean_field(system: PrimitiveSystem, n_electrons: int, kind: str = "unrestricted",
                   max_iter: int = 500, conv_tol: float = 1e-9, mixing: float = 0.3,
                   seed: int = 0, break_symmetry: float = 0.05) -> SCFResult:
    """Hartree-Fock with the diagonal two-body form and linear density mixing.

    Coulomb: J[mu, mu] = sum_nu v[mu, nu] D[nu, nu]; exchange K = v * D_spin.
    ``mixing`` is the fraction of the new density taken at each step.
    """
    n_p = system.n_points
    if n_electrons < 0 or n_electrons > 2 * n_p:
        raise ValueError("n_electrons out of range")
    if conv_tol <= 0:
        raise ValueError("conv_tol must be positive")
    if kind not in ("restricted", "unrestricted"):
        raise ValueError(f"unknown SCF kind {kind!r}")
    if kind == "restricted" and n_electrons % 2:
        raise ValueError("restricted SCF needs an even electron count")
    n_a = (n_electrons + 1) // 2
    n_b = n_electrons // 2
    h = system.one_body
    v = system.v_p

    d_a, eps, c = _aufbau(h, n_a)
    d_b, _, _ = _aufbau(h, n_b)
    if kind == "unrestricted" and break_symmetry and 0 < n_a < n_p:
        # rotate the alpha HOMO toward the LUMO plus a small seeded noise
        rng = np.random.default_rng(seed)
        theta = break_symmetry
        homo, lumo = c[:, n_a - 1].copy(), c[:, n_a].copy()
        occ = c[:, :n_a].copy()
        occ[:, -1] = np.cos(theta) * homo + np.sin(theta) * lumo
        occ = occ + 1e-3 * break_symmetry * rng.standard_normal(occ.shape)
        occ, _ = np.linalg.qr(occ)
        d_a = occ @ occ.T

    energies = [scf_energy(system, d_a, d_b)]
    delta = np.inf
    for it in range(1, max_iter + 1):
        d = d_a + d_b
        j, k_a = _coulomb_exchange(v, d, d_a)
        f_a = h + np.diag(j) - k_a
        if kind == "restricted":
            f_b = f_a
        else:
            _, k_b = _coulomb_exchange(v, d, d_b)
            f_b = h + np.diag(j) - k_b
        new_a, eps, c = _aufbau(f_a, n_a)
        new_b = new_a if kind == "restricted" else _aufbau(f_b, n_b)[0]
        delta = max(np.max(np.abs(new_a - d_a)), np.max(np.abs(new_b - d_b)))
        if delta < conv_tol:
            d_a, d_b = new_a, new_b
            energies.append(scf_energy(system, d_a, d_b))
            break
        d_a = (1.0 - mixing) * d_a + mixing * new_a
        d_b = (1.0 - mixing) * d_b + mixing * new_b
        energies.append(scf_energy(system, d_a, d_b))
    else:
        raise SCFConvergenceError(energies[-1], delta, max_iter)

    log.debug("SCF converged in %d iterations, E = %.12f", it, energies[-1])
    orbitals = OrbitalSet(c, [CANONICAL_MO] * c.shape[1])
    density = DensityMatrix(d_a + d_b, d_a, d_b)
    return SCFResult(energies[-1], orbitals, density, energies, it, eps)


def gaussian_projector(grid: Grid, geometry: Geometry, shells) -> DensityMatrix:
    """Projector onto the span of the sampled Gaussians (trace = shell count)."""
    phi = lowdin_orthonormalize(sample_gaussians(grid, geometry, shells)).phi
    return DensityMatrix(phi @ phi.T)


def hybrid_density(d_uhf: DensityMatrix, d_gauss: DensityMatrix, alpha: float) -> DensityMatrix:
    if d_uhf.D.shape != d_gauss.D.shape:
        raise ValueError(f"dimension mismatch {d_uhf.D.shape} vs {d_gauss.D.shape}")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return DensityMatrix(d_uhf.D + alpha * d_gauss.D)


def natural_orbitals(density: DensityMatrix, keep: int | None = None,
                     threshold: float | None = None) -> tuple[OrbitalSet, np.ndarray]:
    """Leading eigenvectors of D, occupation-descending.

    Exactly one of ``keep`` (a count) or ``threshold`` (minimum occupation).
    Returns the orbitals and all occupations in descending order.
    """
    d = density.D
    if (keep is None) == (threshold is None):
        raise ValueError("give exactly one of keep or threshold")
    n = d.shape[0]
    w, vecs = np.linalg.eigh(0.5 * (d + d.T))
    order = np.argsort(-w, kind="stable")
    w, vecs = w[order], vecs[:, order]
    if keep is None:
        keep = int(np.sum(w >= threshold))
    if keep > n:
        raise ValueError(f"keep={keep} exceeds basis size {n}")
    phi = _fix_signs(vecs[:, :keep])
    return OrbitalSet(phi, [NATURAL_ORBITAL] * keep), w


def project_active_hamiltonian(system: PrimitiveSystem, orbitals: OrbitalSet) -> ActiveHamiltonian:
    phi = orbitals.phi
    if phi.shape[0] != system.n_points:
        raise ValueError("orbital rows do not match the primitive basis")
    n = phi.shape[1]
    h_a = phi.T @ system.one_body @ phi
    h_a = 0.5 * (h_a + h_a.T)
    # pair densities rho[mu, p, s] = phi[mu, p] phi[mu, s]
    rho = (phi[:, :, None] * phi[:, None, :]).reshape(system.n_points, n * n)
    chem = rho.T @ system.v_p @ rho  # (ps | qr)
    chem = chem.reshape(n, n, n, n)
    v_a = chem.transpose(0, 2, 3, 1)  # [p, s, q, r] -> [p, q, r, s]
    return ActiveHamiltonian(h_a, np.ascontiguousarray(v_a), system.nuclear_repulsion)


@dataclass
class ActiveSpaceSpec:
    """How the active orbital matrix is built for a chain system."""

    kind: str = "natural"  # "natural" | "gaussian" | "canonical"
    exponents: tuple = DEFAULT_EXPONENTS
    scf_kind: str = "unrestricted"
    alpha: float = 0.01
    keep: int | None = None  # None -> number of Gaussian shells
    mixing: float = 0.3
    max_iter: int = 2000
    conv_tol: float = 1e-9


@dataclass
class ActiveSpace:
    orbitals: OrbitalSet
    density: DensityMatrix
    scf: SCFResult | None
    occupations: np.ndarray | None


def build_active_space(system: PrimitiveSystem, n_electrons: int, spec: ActiveSpaceSpec,
                       seed: int = 0) -> ActiveSpace:
    shells = default_shells(system.geometry, spec.exponents)
    gauss = lowdin_orthonormalize(sample_gaussians(system.grid, system.geometry, shells))
    keep = spec.keep if spec.keep is not None else len(shells)
    if spec.kind == "gaussian":
        d = DensityMatrix(gauss.phi @ gauss.phi.T)
        return ActiveSpace(gauss, d, None, None)
    scf = scf_mean_field(system, n_electrons, spec.scf_kind, spec.max_iter, spec.conv_tol,
                         spec.mixing, seed)
    if spec.kind == "canonical":
        phi = scf.orbitals.phi[:, :keep]
        return ActiveSpace(OrbitalSet(phi, [CANONICAL_MO] * keep), scf.density, scf, None)
    if spec.kind != "natural":
        raise ValueError(f"unknown active-space kind {spec.kind!r}")
    d = hybrid_density(scf.density, DensityMatrix(gauss.phi @ gauss.phi.T), spec.alpha)
    nos, occ = natural_orbitals(d, keep=keep)
    # natural orbitals are re-orthonormalized before blocking
    phi = lowdin_orthonormalize(nos.phi, label=NATURAL_ORBITAL)
    return ActiveSpace(phi, d, scf, occ)
