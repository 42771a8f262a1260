import numpy as np
import pytest
from pydantic import ValidationError

from spinchain.errors import CriticalModeError, NormalizationError, SpinChainError
from spinchain.exact import ExactDynamics, build_hamiltonian, eigh_hermitian
from spinchain.fermions import (
    FermionParity,
    XYParams,
    bogoliubov,
    correlator_grids,
    density_density_correlator,
    dispersion,
    group_velocity,
    max_group_velocity,
    mode_evolution,
    momentum_grid,
    nn_rdm_xy,
    pfaffian,
    quadrature_grid,
    two_point_correlators,
    xy_measure_grid,
)
from spinchain.hilbert import ChainSpec, PureState, embed, partial_trace
from spinchain.magnons import one_magnon_initial
from spinchain.operations import MeasureType

A = B = 1 / np.sqrt(2)
ISING = XYParams(jx=1.0, jy=0.0, h=0.5)


def _exact_bond_rdm(chain, params, alpha, beta, j, t):
    psi = embed(one_magnon_initial(chain, alpha, beta)).amplitudes
    state = PureState(chain, ExactDynamics(params, chain).evolve(psi, t))
    return partial_trace(state, [j, j + 1]).elements


def test_xy_params_validation():
    assert XYParams().gamma == pytest.approx(0.4)
    with pytest.raises(ValidationError):
        XYParams(jx=0.0, jy=0.0)


def test_dispersion_values():
    assert dispersion(np.pi / 2, XYParams(jx=0.7, jy=0.3, h=1.0)) == pytest.approx(2.1541, abs=1e-4)
    assert abs(dispersion(np.pi / 2, XYParams(jx=0.5, jy=0.5, h=0.0))) < 1e-12
    q = np.linspace(-np.pi, np.pi, 37)
    assert np.allclose(dispersion(q, XYParams()), dispersion(-q, XYParams()))


def test_bogoliubov_coefficients():
    for q in np.linspace(-3.0, 3.0, 13):
        mode = bogoliubov(q, XYParams())
        assert mode.u ** 2 + mode.v ** 2 == pytest.approx(1.0)
    strong = bogoliubov(0.7, XYParams(h=1e6))
    assert strong.u == pytest.approx(1.0)
    assert strong.v < 1e-3


def test_bogoliubov_rejects_gapless_mode():
    with pytest.raises(CriticalModeError):
        bogoliubov(np.pi / 2, XYParams(jx=0.5, jy=0.5, h=0.0))


def test_mode_evolution_is_unitary():
    start = mode_evolution(0.4, 0.0, XYParams())
    assert start.chi == pytest.approx(1.0)
    assert start.xi == pytest.approx(0.0)
    for q in np.linspace(-3.0, 3.0, 7):
        for t in (0.3, 1.7, 9.0):
            mode = mode_evolution(q, t, XYParams())
            assert abs(mode.chi) ** 2 + abs(mode.xi) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_pair_creation_weakens_with_field():
    q = np.linspace(-np.pi, np.pi, 201)
    times = np.linspace(0.0, 10.0, 101)
    largest = []
    for h in (1.0, 3.0, 10.0):
        params = XYParams(jx=0.7, jy=0.3, h=h)
        largest.append(max(abs(mode_evolution(k, t, params).xi) for k in q for t in times))
    assert largest[0] > largest[1] > largest[2]
    assert largest[2] < 0.05


def test_momentum_grids():
    odd = momentum_grid(4, FermionParity.odd)
    even = momentum_grid(4, FermionParity.even)
    assert np.allclose(sorted(odd), [-np.pi / 2, 0.0, np.pi / 2, np.pi])
    assert np.allclose(sorted(even), [-3 * np.pi / 4, -np.pi / 4, np.pi / 4, 3 * np.pi / 4])


def test_quadrature_grid_is_symmetric():
    q = quadrature_grid(16)
    assert q.size == 32
    assert np.allclose(q, -q[::-1])
    assert np.all(np.abs(q) < np.pi)


def test_pfaffian_squares_to_determinant():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    antisymmetric = m - m.T
    assert pfaffian(antisymmetric) ** 2 == pytest.approx(np.linalg.det(antisymmetric))
    assert pfaffian(np.array([[0, 2.5], [-2.5, 0]])) == pytest.approx(2.5)
    assert pfaffian(np.zeros((3, 3))) == 0


def test_correlators_at_zero_time():
    chain = ChainSpec(n_sites=10)
    alpha, beta = 0.6, 0.8j
    corr = two_point_correlators(1, 0.0, alpha, beta, chain, XYParams())
    assert corr.occupation == pytest.approx(0.36)
    assert corr.next_occupation == pytest.approx(0.64)
    assert corr.density_density == pytest.approx(0.0, abs=1e-12)
    assert corr.hopping == pytest.approx(np.conj(alpha) * beta)
    assert corr.pairing == pytest.approx(0.0, abs=1e-12)


def test_initial_bond_is_a_bell_pair():
    chain = ChainSpec(n_sites=10)
    rdm = nn_rdm_xy(1, 0.0, A, B, chain, XYParams())
    assert rdm.w1 == pytest.approx(0.5)
    assert rdm.w2 == pytest.approx(0.5)
    assert rdm.x == pytest.approx(0.5)
    far = nn_rdm_xy(3, 0.0, A, B, chain, XYParams())
    assert far.u == pytest.approx(1.0)


def test_analytic_bond_rejects_other_pairs():
    with pytest.raises(SpinChainError):
        nn_rdm_xy(2, 1.0, A, B, ChainSpec(n_sites=10), XYParams(), k=4)
    with pytest.raises(SpinChainError):
        nn_rdm_xy(2, 1.0, A, B, ChainSpec(n_sites=9), XYParams())
    with pytest.raises(SpinChainError):
        nn_rdm_xy(10, 1.0, A, B, ChainSpec(n_sites=10), XYParams())


def test_correlators_need_normalized_amplitudes():
    with pytest.raises(NormalizationError):
        two_point_correlators(1, 1.0, 1.0, 1.0, ChainSpec(n_sites=8), XYParams())


@pytest.mark.parametrize(
    "params, j, t",
    [
        (XYParams(jx=0.7, jy=0.3, h=1.0), 2, 1.0),
        (XYParams(jx=0.7, jy=0.3, h=0.2), 5, 2.5),
        (ISING, 1, 1.3),
        (XYParams(jx=0.5, jy=0.5, h=0.0), 4, 0.8),
    ],
)
def test_bond_rdm_matches_exact_diagonalization(params, j, t):
    chain = ChainSpec(n_sites=10)
    alpha, beta = 0.6, 0.8 * np.exp(0.3j)
    analytic = nn_rdm_xy(j, t, alpha, beta, chain, params).to_density_matrix((j, j + 1)).elements
    assert np.allclose(analytic, _exact_bond_rdm(chain, params, alpha, beta, j, t), atol=1e-8)


def test_density_density_matches_exact_diagonalization():
    chain = ChainSpec(n_sites=8)
    params = XYParams(jx=0.9, jy=0.1, h=0.3)
    nn = density_density_correlator(3, 1.4, A, B, chain, params)
    exact = _exact_bond_rdm(chain, params, A, B, 3, 1.4)
    assert nn.real == pytest.approx(exact[3, 3].real, abs=1e-8)
    assert abs(nn.imag) < 1e-10


def test_isotropic_chain_conserves_magnon_number():
    chain = ChainSpec(n_sites=12)
    params = XYParams(jx=0.5, jy=0.5, h=0.7)
    for t in (1.0, 4.0):
        total = sum(two_point_correlators(j, t, A, B, chain, params).occupation for j in range(1, 12))
        total += two_point_correlators(11, t, A, B, chain, params).next_occupation
        assert total == pytest.approx(1.0, abs=1e-10)


def test_strong_field_nearly_conserves_magnon_number():
    chain = ChainSpec(n_sites=20)
    params = XYParams(jx=0.7, jy=0.3, h=10.0)
    for t in (1.0, 5.0):
        total = sum(two_point_correlators(j, t, A, B, chain, params).occupation for j in range(1, 20))
        total += two_point_correlators(19, t, A, B, chain, params).next_occupation
        assert total == pytest.approx(1.0, abs=0.05)


def test_infinite_chain_limit_matches_long_ring():
    params = XYParams()
    ring = nn_rdm_xy(1, 1.0, A, B, ChainSpec(n_sites=256), params)
    infinite = nn_rdm_xy(1, 1.0, A, B, ChainSpec(n_sites=256), params, quadrature=True)
    for name in ("u", "v", "w1", "w2", "x", "z"):
        assert getattr(infinite, name) == pytest.approx(getattr(ring, name), abs=1e-4)


def test_xy_measure_grid_shape_and_threads():
    chain = ChainSpec(n_sites=10)
    times = np.linspace(0.0, 2.0, 5)
    serial = xy_measure_grid(chain, XYParams(), A, B, MeasureType.concurrence, times)
    threaded = xy_measure_grid(chain, XYParams(), A, B, MeasureType.concurrence, times, threads=3)
    assert serial.shape == (9, 5)
    assert serial[0, 0] == pytest.approx(1.0)
    assert np.array_equal(serial, threaded)


def test_xy_measure_grid_rejects_tripartite_information():
    with pytest.raises(SpinChainError):
        xy_measure_grid(ChainSpec(n_sites=10), XYParams(), A, B, MeasureType.tmi, [0.0])


def test_correlator_grids():
    chain = ChainSpec(n_sites=8)
    grids = correlator_grids(chain, XYParams(), A, B, [0.0, 1.0])
    assert set(grids) == {"sigma_plus_minus", "sigma_plus_plus", "sigma_z_z"}
    assert grids["sigma_z_z"].shape == (7, 2)
    assert grids["sigma_plus_minus"][0, 0] == pytest.approx(0.5)
    assert grids["sigma_z_z"][0, 0] == pytest.approx(-1.0)
    assert grids["sigma_z_z"][3, 0] == pytest.approx(1.0)


def test_group_velocity_matches_the_dispersion_slope():
    params = XYParams(jx=0.7, jy=0.3, h=1.0)
    q = np.linspace(-3.0, 3.0, 25)
    step = 1e-6
    numeric = (dispersion(q + step, params) - dispersion(q - step, params)) / (2 * step)
    assert np.allclose(group_velocity(q, params), numeric, atol=1e-6)
    assert max_group_velocity(XYParams(jx=0.7, jy=0.3, h=10.0)) == pytest.approx(1.9987, abs=1e-3)


def test_isotropic_spectrum_matches_exact_one_particle_levels():
    chain = ChainSpec(n_sites=8)
    params = XYParams(jx=0.6, jy=0.6, h=0.3)
    (vacuum,) = eigh_hermitian(build_hamiltonian(params, chain, sector=0).matrix).eigenvalues
    levels = eigh_hermitian(build_hamiltonian(params, chain, sector=1).matrix).eigenvalues
    expected = np.sort(dispersion(momentum_grid(8, FermionParity.odd), params))
    assert np.allclose(np.sort(np.abs(levels - vacuum)), expected, atol=1e-10)


def _ring_distance(bond_start: int, n_sites: int) -> float:
    offsets = (abs(s - 1.5) for s in (bond_start, bond_start + 1))
    return min(min(d, n_sites - d) for d in offsets)


def _field_regime_grid(h: float):
    chain = ChainSpec(n_sites=20)
    times = np.linspace(0.0, 10.0, 201)
    params = XYParams(jx=0.7, jy=0.3, h=h)
    return params, times, xy_measure_grid(chain, params, A, B, MeasureType.concurrence, times)


def test_strong_field_concurrence_spreads_inside_a_light_cone():
    params, times, grid = _field_regime_grid(10.0)
    v = max_group_velocity(params)
    outside = [
        grid[row, col]
        for row in range(grid.shape[0])
        for col, t in enumerate(times)
        if _ring_distance(row + 1, 20) > v * t + 3
    ]
    assert outside
    # pair creation leaks a small tail ahead of the front
    assert max(outside) < 0.05
    assert grid[5:14].max() > 0.01


def test_weak_field_concurrence_leaves_the_initial_pair():
    _, _, grid = _field_regime_grid(0.1)
    assert grid[0, 0] == pytest.approx(1.0)
    distant = grid[3:].max()
    assert 0.05 < distant < 0.3
