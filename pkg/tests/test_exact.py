import numpy as np
import pytest

from spinchain.errors import SizeLimitError, SpinChainError
from spinchain.exact import (
    DecompositionCache,
    ExactDynamics,
    HamiltonianMatrix,
    OracleReport,
    StepUnitary,
    build_hamiltonian,
    cached_operator,
    compare_oracle,
    eigh_hermitian,
    evolve_exact,
    exact_measure_grid,
    one_magnon_block,
    sector_indices,
)
from spinchain.fermions import XYParams, xy_measure_grid
from spinchain.hilbert import (
    ChainSpec,
    PureState,
    embed,
    parity_expectation,
    partial_trace,
    popcounts,
    reduced_density_matrix,
    total_magnetization,
)
from spinchain.magnons import (
    HarperParams,
    HeisenbergParams,
    evolve_one_magnon,
    evolve_sector,
    measure_grid,
    nearest_neighbour_parties,
    one_magnon_initial,
    one_magnon_propagator,
    vacuum_two_magnon_initial,
)
from spinchain.measures import is_xstate
from spinchain.operations import MeasureType

A = B = 1 / np.sqrt(2)


def _random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return m + m.conj().T


def test_three_site_one_magnon_block():
    h = build_hamiltonian(HeisenbergParams(J=1.0, delta=0.7), ChainSpec(n_sites=3), sector=1).matrix
    expected = np.full((3, 3), -2.0) + np.diag([2.0 + 0.7] * 3)
    assert np.allclose(h, expected)


@pytest.mark.parametrize("model", [HeisenbergParams(delta=0.4), XYParams(), XYParams(jx=1.0, jy=0.0, h=0.3)])
def test_hamiltonians_are_hermitian(model):
    h = build_hamiltonian(model, ChainSpec(n_sites=6)).matrix
    assert np.allclose(h, h.conj().T)


def test_symmetries_of_the_xy_chain():
    chain = ChainSpec(n_sites=6)
    total_z = np.diag((6 - 2 * popcounts(6)).astype(float))
    parity = np.diag((-1.0) ** popcounts(6))
    isotropic = build_hamiltonian(XYParams(jx=0.5, jy=0.5, h=0.3), chain).matrix
    anisotropic = build_hamiltonian(XYParams(), chain).matrix
    assert np.allclose(isotropic @ total_z, total_z @ isotropic)
    assert not np.allclose(anisotropic @ total_z, total_z @ anisotropic)
    assert np.allclose(anisotropic @ parity, parity @ anisotropic)


def _random_state(rng, chain):
    v = rng.normal(size=chain.dim) + 1j * rng.normal(size=chain.dim)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("model", [XYParams(), XYParams(jx=1.0, jy=0.0, h=0.0), HeisenbergParams(delta=0.5)])
def test_energy_is_conserved_along_evolution(model):
    chain = ChainSpec(n_sites=8)
    h = build_hamiltonian(model, chain).matrix
    psi = _random_state(np.random.default_rng(21), chain)
    states = ExactDynamics(model, chain).evolve_many(psi, np.linspace(0.0, 5.0, 11))
    energies = np.einsum("ti,ij,tj->t", states.conj(), h, states)
    assert np.allclose(energies.imag, 0.0, atol=1e-10)
    assert np.ptp(energies.real) < 1e-10


def test_magnetization_and_parity_along_evolution():
    chain = ChainSpec(n_sites=8)
    psi = _random_state(np.random.default_rng(22), chain)
    times = np.linspace(0.0, 5.0, 11)

    def trace(model, observable):
        states = ExactDynamics(model, chain).evolve_many(psi, times)
        return np.array([observable(PureState(chain, s)) for s in states])

    def magnetization(state):
        return total_magnetization(state, 8)

    for model in (XYParams(jx=0.5, jy=0.5, h=0.3), HeisenbergParams(delta=0.5)):
        assert np.ptp(trace(model, magnetization)) < 1e-10
    assert np.ptp(trace(XYParams(), magnetization)) > 1e-3
    for model in (XYParams(), XYParams(jx=1.0, jy=0.0, h=0.5)):
        parity = trace(model, parity_expectation)
        assert np.ptp(parity) < 1e-10
        assert parity[0] == pytest.approx(parity_expectation(PureState(chain, psi)))


def test_anisotropic_xy_has_no_magnon_sector():
    with pytest.raises(SpinChainError):
        build_hamiltonian(XYParams(), ChainSpec(n_sites=6), sector=1)


def test_size_limits():
    with pytest.raises(SizeLimitError):
        build_hamiltonian(HeisenbergParams(), ChainSpec(n_sites=13))
    assert sector_indices(13, 1).size == 13
    with pytest.raises(SizeLimitError):
        eigh_hermitian(np.eye(65), "jacobi")


def test_harper_builds_a_step_unitary():
    step = build_hamiltonian(HarperParams(g=1.0, tau=0.9), ChainSpec(n_sites=5))
    assert isinstance(step, StepUnitary)
    assert np.allclose(step.matrix @ step.matrix.conj().T, np.eye(32), atol=1e-10)


@pytest.mark.parametrize("solver", ["lapack", "jacobi"])
def test_eigensolvers_reconstruct_the_matrix(solver):
    h = _random_hermitian(np.random.default_rng(6), 20)
    decomposition = eigh_hermitian(h, solver)
    v, lam = decomposition.eigenvectors, decomposition.eigenvalues
    assert np.max(np.abs(v @ np.diag(lam) @ v.conj().T - h)) < 1e-10
    assert np.allclose(v.conj().T @ v, np.eye(20), atol=1e-10)


def test_jacobi_handles_degenerate_spectra():
    h = build_hamiltonian(HeisenbergParams(), ChainSpec(n_sites=8), sector=1).matrix
    jacobi = eigh_hermitian(h, "jacobi")
    lapack = eigh_hermitian(h, "lapack")
    assert np.allclose(np.sort(jacobi.eigenvalues), np.sort(lapack.eigenvalues), atol=1e-10)
    assert np.allclose(jacobi.propagator(0.8), lapack.propagator(0.8), atol=1e-10)


def test_unknown_solver():
    with pytest.raises(SpinChainError):
        eigh_hermitian(np.eye(2), "qr")


def test_decomposition_cache_builds_each_key_once():
    cache = DecompositionCache()
    calls = []

    def build():
        calls.append(1)
        return "decomposition"

    assert cache.get("key", build) == "decomposition"
    assert cache.get("key", build) == "decomposition"
    assert len(calls) == 1
    assert len(cache) == 1
    cache.clear()
    assert len(cache) == 0


def test_decomposition_cache_forgets_failed_builds():
    cache = DecompositionCache()

    def broken():
        raise SpinChainError("boom")

    with pytest.raises(SpinChainError):
        cache.get("key", broken)
    assert len(cache) == 0


def test_cached_operator_is_shared():
    chain = ChainSpec(n_sites=5)
    assert cached_operator(HeisenbergParams(), chain) is cached_operator(HeisenbergParams(), chain)


def test_ed_one_magnon_block_matches_analytic_propagator():
    chain = ChainSpec(n_sites=8)
    params = HeisenbergParams(J=0.8, delta=1.3)
    full = cached_operator(params, chain).propagator(0.9)
    sector = cached_operator(params, chain, sector=1).propagator(0.9)
    analytic = one_magnon_propagator(chain, params, 0.9).matrix()
    assert np.allclose(one_magnon_block(full, 8), analytic, atol=1e-10)
    assert np.allclose(sector, analytic, atol=1e-10)


def test_ed_matches_one_magnon_amplitudes():
    chain = ChainSpec(n_sites=8)
    params = HeisenbergParams(J=1.0, delta=0.5)
    analytic = embed(evolve_one_magnon(A, B, chain, params, 0.7)).amplitudes
    exact = ExactDynamics(params, chain).evolve(embed(one_magnon_initial(chain, A, B)).amplitudes, 0.7)
    assert np.max(np.abs(analytic - exact)) < 1e-11


@pytest.mark.parametrize("delta", [-1.0, 0.0, 0.5, 1.0])
def test_ed_matches_vacuum_two_magnon_rdm(delta):
    chain = ChainSpec(n_sites=8)
    params = HeisenbergParams(delta=delta)
    initial = vacuum_two_magnon_initial(chain, A, B)
    analytic = reduced_density_matrix(evolve_sector(initial, params, 0.5), [1, 2, 3])
    exact = ExactDynamics(params, chain).evolve(embed(initial).amplitudes, 0.5)
    expected = partial_trace(PureState(chain, exact), [1, 2, 3])
    assert compare_oracle(analytic, expected, 1e-8).passed


def test_ed_matches_harper_stroboscopic_map():
    chain = ChainSpec(n_sites=10)
    params = HarperParams(g=1.0, tau=0.9)
    initial = one_magnon_initial(chain, 0.6, 0.8)
    t = 5 * params.tau
    analytic = embed(evolve_sector(initial, params, t)).amplitudes
    dynamics = ExactDynamics(params, chain)
    assert dynamics.stroboscopic
    exact = dynamics.evolve(embed(initial).amplitudes, t)
    assert np.max(np.abs(analytic - exact)) < 1e-10


@pytest.mark.parametrize("model", [HeisenbergParams(delta=0.2), HarperParams(g=0.5, tau=0.3)])
def test_evolve_many_matches_single_evolutions(model):
    chain = ChainSpec(n_sites=6)
    psi = embed(one_magnon_initial(chain, A, B)).amplitudes
    times = [1.2, 0.0, 0.6]
    dynamics = ExactDynamics(model, chain)
    rows = dynamics.evolve_many(psi, times)
    for row, t in zip(rows, times):
        assert np.allclose(row, dynamics.evolve(psi, t), atol=1e-12)


def test_evolve_exact_on_density_matrix_and_vector():
    chain = ChainSpec(n_sites=5)
    params = HeisenbergParams()
    h = build_hamiltonian(params, chain)
    state = PureState(chain, embed(one_magnon_initial(chain, A, B)).amplitudes)
    evolved = evolve_exact(state, h, 0.4)
    assert isinstance(evolved, PureState)
    raw = evolve_exact(state.amplitudes, h, 0.4)
    assert np.allclose(raw, evolved.amplitudes)
    with pytest.raises(SpinChainError):
        evolve_exact(np.ones(4), h, 0.4)


def test_evolve_exact_uses_the_given_matrix_and_solver():
    chain = ChainSpec(n_sites=4)
    h = build_hamiltonian(HeisenbergParams(delta=0.3), chain, sector=1)
    doubled = HamiltonianMatrix(h.model, chain, 2.0 * h.matrix, h.basis, h.sector)
    psi = np.array([A, B, 0.0, 0.0], dtype=complex)
    assert np.allclose(evolve_exact(psi, doubled, 0.35), evolve_exact(psi, h, 0.7), atol=1e-12)
    jacobi = evolve_exact(psi, h, 0.7, solver="jacobi")
    assert np.allclose(jacobi, evolve_exact(psi, h, 0.7), atol=1e-10)
    with pytest.raises(SpinChainError):
        evolve_exact(psi, h, 0.7, solver="qr")


def test_exact_grid_agrees_with_fermion_path():
    chain = ChainSpec(n_sites=10)
    params = XYParams(jx=0.7, jy=0.3, h=1.5)
    times = np.linspace(0.0, 2.0, 5)
    psi = embed(one_magnon_initial(chain, A, B)).amplitudes
    exact = exact_measure_grid(
        chain, params, psi, MeasureType.concurrence, nearest_neighbour_parties(chain), times
    )
    analytic = xy_measure_grid(chain, params, A, B, MeasureType.concurrence, times)
    assert np.allclose(exact, analytic, atol=1e-6)


def test_exact_grid_agrees_with_magnon_path():
    chain = ChainSpec(n_sites=8)
    params = HeisenbergParams(delta=0.6)
    times = [0.0, 0.5, 1.5]
    parties = [((1,), (2,), (3,)), ((2,), (4,), (5,))]
    initial = one_magnon_initial(chain, A, B)
    exact = exact_measure_grid(chain, params, embed(initial).amplitudes, MeasureType.tmi, parties, times)
    analytic = measure_grid(chain, params, initial, MeasureType.tmi, parties, times)
    assert np.allclose(exact, analytic, atol=1e-8)


def test_ising_tripartite_information_stays_between_minus_one_and_zero():
    chain = ChainSpec(n_sites=8)
    psi = embed(one_magnon_initial(chain, A, B)).amplitudes
    grid = exact_measure_grid(
        chain, XYParams(jx=1.0, jy=0.0, h=0.0), psi, MeasureType.tmi, [((1,), (2,), (3,))],
        np.linspace(0.0, 10.0, 21),
    )
    assert grid.min() >= -1.0 - 1e-8
    assert grid.max() <= 1e-8


def test_xy_bond_rdm_is_an_x_state():
    chain = ChainSpec(n_sites=8)
    psi = embed(one_magnon_initial(chain, A, B)).amplitudes
    evolved = ExactDynamics(XYParams(), chain).evolve(psi, 1.1)
    assert is_xstate(partial_trace(PureState(chain, evolved), [2, 3]))


def test_oracle_report():
    report = compare_oracle(np.zeros(3), np.full(3, 1e-9), 1e-8, "tiny")
    assert isinstance(report, OracleReport)
    assert report.passed
    assert str(report).startswith("PASS tiny")
    failing = compare_oracle(np.zeros(3), np.ones(3), 1e-8, "large")
    assert not failing.passed
    assert str(failing).startswith("FAIL large")
    with pytest.raises(SpinChainError):
        compare_oracle(np.zeros(3), np.zeros(4), 1e-8)


def test_oracle_report_keeps_the_worst_sample():
    reports = [OracleReport("s", d, 1e-8) for d in (1e-12, 3e-9, 1e-10)]
    merged = OracleReport.worst_of("bond", reports)
    assert merged.samples == 3
    assert merged.max_abs_diff == pytest.approx(3e-9)
    assert merged.passed
    assert "over 3 samples" in str(merged)
    assert not OracleReport.worst_of("bond", reports + [OracleReport("s", 1e-6, 1e-8)]).passed
    with pytest.raises(SpinChainError):
        OracleReport.worst_of("bond", [])
