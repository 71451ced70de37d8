import numpy as np
import pytest

from dgblock.activespace import ActiveSpaceSpec, build_active_space, project_active_hamiltonian
from dgblock.config import ExperimentConfig
from dgblock.dgbasis import compress, partition_atom_centered
from dgblock.blockham import build_dg_hamiltonian
from dgblock.primitive import model_chain

H2_GRID = dict(bond=1.5, spacing=0.5, padding=7.0)  # 32 points, two 16-point blocks


def two_electron_singlet_energy(system, basis):
    """Ground energy of 1 up + 1 down electron in span(basis), from the
    primitive grid Hamiltonian projected onto basis x basis."""
    n = system.n_points
    h = system.one_body
    eye = np.eye(n)
    hmat = np.kron(h, eye) + np.kron(eye, h) + np.diag(system.v_p.reshape(-1))
    b2 = np.kron(basis, basis)
    w = np.linalg.eigvalsh(b2.T @ hmat @ b2)
    return float(w[0]) + system.nuclear_repulsion


@pytest.fixture(scope="session")
def h2_system():
    return model_chain(2, **H2_GRID)


@pytest.fixture(scope="session")
def h2_active(h2_system):
    return {keep: build_active_space(h2_system, 2, ActiveSpaceSpec(keep=keep))
            for keep in (2, 4)}


@pytest.fixture(scope="session")
def h4_self_dg():
    """Model H4 with the self term kept, natural orbitals, atom blocks, tau 1e-2."""
    system = model_chain(4, include_self_term=True)
    act = build_active_space(system, 4, ActiveSpaceSpec())
    dg = compress(act.orbitals, partition_atom_centered(system.grid, system.geometry), 1e-2)
    return system, act, dg, build_dg_hamiltonian(system, dg)


@pytest.fixture(scope="session")
def h4_chain():
    system = model_chain(4)
    act = build_active_space(system, 4, ActiveSpaceSpec())
    ah = project_active_hamiltonian(system, act.orbitals)
    dg = compress(act.orbitals, partition_atom_centered(system.grid, system.geometry), 1e-2)
    return system, act, ah, dg, build_dg_hamiltonian(system, dg)


@pytest.fixture(scope="session")
def sweep_config():
    return ExperimentConfig(sweep_sizes=(4, 6, 8, 10, 12, 14, 16), taus=(1e-2,))


@pytest.fixture(scope="session")
def sweep_manifests(sweep_config):
    from dgblock.pipeline import run_sweep
    return run_sweep(sweep_config, workers=1)


def random_dg_instance(rng, n_blocks, n_kappa, points_per_block=6):
    """Random orthonormal U blocks over a small 1D grid with a soft-Coulomb kernel."""
    from dgblock.dgbasis import DGBasis, partition_uniform

    n_p = points_per_block * n_blocks
    system = model_chain(1, spacing=0.3, padding=0.15 * (n_p - 1))
    assert system.n_points == n_p
    part = partition_uniform(system.grid, n_blocks)
    us = []
    for block, nk in zip(part.blocks, n_kappa):
        q, _ = np.linalg.qr(rng.standard_normal((block.size, nk)))
        us.append(q)
    dg = DGBasis(part, us, [np.ones(nk) for nk in n_kappa], [np.zeros(0)] * n_blocks, 0.0,
                 "relative")
    return system, dg


def dense_rotation_oracle(system, u):
    """v[p,q,r,s] = sum_{mu,nu} U[mu,p] U[mu,s] v_p[mu,nu] U[nu,q] U[nu,r]."""
    return np.einsum("mp,ms,mn,nq,nr->pqrs", u, u, system.v_p, u, u, optimize=True)


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
