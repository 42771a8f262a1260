import numpy as np
import pytest

from spinchain.errors import NormalizationError, SpinChainError
from spinchain.hilbert import DensityMatrix
from spinchain.measures import (
    XStateRDM,
    binary_entropy,
    build_pq_mixture,
    concurrence,
    discord,
    discord_numeric,
    ghz_state,
    is_xstate,
    measure_report,
    mutual_information,
    negativity,
    sigma_pair_expectations,
    tmi,
    tmi_map,
    tmi_sign,
    vn_entropy,
    w_state,
    xstate_from_density_matrix,
)

BELL = XStateRDM(u=0.0, v=0.0, w1=0.5, w2=0.5, x=0.5)


def _random_xstate(rng) -> XStateRDM:
    u, v, w1, w2 = rng.dirichlet(np.ones(4))
    x = 0.9 * np.sqrt(w1 * w2) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    z = 0.9 * np.sqrt(u * v) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return XStateRDM(u=u, v=v, w1=w1, w2=w2, x=x, z=z)


def _random_pure(rng, n_qubits) -> DensityMatrix:
    psi = rng.normal(size=2 ** n_qubits) + 1j * rng.normal(size=2 ** n_qubits)
    psi /= np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), tuple(range(1, n_qubits + 1)))


def test_entropies():
    assert vn_entropy(DensityMatrix(np.eye(4) / 4)) == pytest.approx(2.0)
    assert vn_entropy(BELL.to_density_matrix()) == pytest.approx(0.0, abs=1e-12)
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0


def test_xstate_rejects_inconsistent_entries():
    with pytest.raises(NormalizationError):
        XStateRDM(u=0.5, v=0.5, w1=0.5, w2=0.0)
    with pytest.raises(SpinChainError):
        XStateRDM(u=0.0, v=0.0, w1=0.5, w2=0.5, x=0.6)
    with pytest.raises(SpinChainError):
        XStateRDM(u=0.5, v=0.0, w1=0.25, w2=0.25, z=0.1)


def test_xstate_round_trip_through_density_matrix():
    rdm = _random_xstate(np.random.default_rng(1))
    rho = rdm.to_density_matrix()
    assert is_xstate(rho)
    back = xstate_from_density_matrix(rho)
    assert back.x == pytest.approx(rdm.x)
    assert back.z == pytest.approx(rdm.z)


def test_non_xstate_detected():
    rho = np.full((4, 4), 0.25)
    assert not is_xstate(DensityMatrix(rho))
    with pytest.raises(SpinChainError):
        xstate_from_density_matrix(DensityMatrix(rho))


def test_bell_state_measures():
    assert concurrence(BELL) == pytest.approx(1.0)
    assert discord(BELL) == pytest.approx(1.0)
    assert discord(BELL, "B") == pytest.approx(1.0)
    assert negativity(BELL) == pytest.approx(0.5)
    assert mutual_information(BELL.to_density_matrix()) == pytest.approx(2.0)


def test_product_state_has_no_correlations():
    product = XStateRDM(u=1.0, v=0.0, w1=0.0, w2=0.0)
    assert concurrence(product) == 0.0
    assert discord(product) == 0.0
    assert negativity(product) == 0.0
    assert mutual_information(product.to_density_matrix()) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_xstate_concurrence_matches_general_formula(seed):
    rdm = _random_xstate(np.random.default_rng(seed))
    assert concurrence(rdm) == pytest.approx(concurrence(rdm.to_density_matrix()), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_xstate_negativity_matches_partial_transpose(seed):
    rdm = _random_xstate(np.random.default_rng(seed))
    assert negativity(rdm) == pytest.approx(negativity(rdm.to_density_matrix(), (1,)), abs=1e-10)


def test_closed_form_discord_matches_numeric_search():
    rdm = XStateRDM(u=0.35, v=0.35, w1=0.15, w2=0.15, x=0.1, z=0.3)
    rho = rdm.to_density_matrix()
    assert discord(rdm, "A") == pytest.approx(discord_numeric(rho, "A"), abs=1e-6)
    assert discord(rdm, "B") == pytest.approx(discord_numeric(rho, "B"), abs=1e-6)


def test_discord_on_b_equals_discord_on_a_of_swapped_state():
    rdm = _random_xstate(np.random.default_rng(9))
    swapped = XStateRDM(u=rdm.u, v=rdm.v, w1=rdm.w2, w2=rdm.w1, x=np.conj(rdm.x), z=rdm.z)
    assert discord(rdm, "B") == pytest.approx(discord(swapped, "A"), abs=1e-12)


def test_discord_rejects_unknown_party():
    with pytest.raises(SpinChainError):
        discord(BELL, "C")


def test_ghz_and_w_tripartite_information():
    assert tmi(ghz_state(4), [(1,), (2,), (3,)]) == pytest.approx(1.0, abs=1e-10)
    expected_w = 4 * binary_entropy(0.25) - 3
    assert expected_w == pytest.approx(0.2451, abs=2e-3)
    assert tmi(w_state(4), [(1,), (2,), (3,)]) == pytest.approx(expected_w, abs=1e-10)


def test_tripartite_information_of_pure_three_qubit_state_vanishes():
    rho = _random_pure(np.random.default_rng(5), 3)
    assert tmi(rho) == pytest.approx(0.0, abs=1e-10)


def test_tripartite_information_is_symmetric_in_parties():
    rho = _random_pure(np.random.default_rng(8), 4)
    first = tmi(rho, [(1,), (2,), (3, 4)])
    assert tmi(rho, [(3, 4), (1,), (2,)]) == pytest.approx(first, abs=1e-10)


def test_tripartite_information_needs_three_parties():
    with pytest.raises(SpinChainError):
        tmi(ghz_state(4))
    with pytest.raises(SpinChainError):
        tmi(ghz_state(3), [(1,), (2,)])


def test_pq_mixture_corners_and_negative_interior():
    assert tmi(build_pq_mixture(1.0, 0.0)) == pytest.approx(0.0, abs=1e-10)
    assert tmi(build_pq_mixture(0.0, 1.0)) == pytest.approx(0.0, abs=1e-10)
    assert tmi(build_pq_mixture(0.0, 0.0)) == pytest.approx(0.0, abs=1e-10)
    assert tmi(build_pq_mixture(0.5, 0.25)) == pytest.approx(-0.2241, abs=1e-3)


def test_pq_mixture_rejects_out_of_simplex():
    with pytest.raises(SpinChainError):
        build_pq_mixture(0.8, 0.3)


def test_tmi_sign_treats_round_off_as_zero():
    assert tmi_sign(-0.2241) == -1
    assert tmi_sign(0.195) == 1
    assert tmi_sign(5e-11) == 0
    assert tmi_sign(-5e-11) == 0
    assert tmi_sign(1e-6, tol=1e-5) == 0


def test_tmi_map_covers_the_simplex():
    cells = tmi_map(5, 5)
    assert len(cells) == 15
    assert all(p + q <= 1 + 1e-12 for p, q, _ in cells)
    assert min(value for _, _, value in cells) < 0


def test_measure_report_for_bell_state():
    report = measure_report(BELL.to_density_matrix(), rho_abc=ghz_state(3))
    assert report.concurrence == pytest.approx(1.0)
    assert report.mutual_information == pytest.approx(2.0)
    assert report.discord == pytest.approx(1.0)
    assert report.negativity == pytest.approx(0.5)
    assert report.tmi == pytest.approx(1.0)


def test_measure_report_uses_numeric_discord_for_general_states():
    rng = np.random.default_rng(2)
    rho = _random_pure(rng, 2)
    report = measure_report(rho)
    # pure states: discord equals the entanglement entropy
    entropy = vn_entropy(np.trace(rho.elements.reshape(2, 2, 2, 2), axis1=1, axis2=3))
    assert report.discord == pytest.approx(entropy, abs=1e-6)
    assert report.tmi is None


def test_sigma_pair_expectations_for_bell_state():
    values = sigma_pair_expectations(BELL.to_density_matrix())
    assert values["sigma_plus_minus"] == pytest.approx(0.5)
    assert values["sigma_plus_plus"] == pytest.approx(0.0)
    assert values["sigma_z_z"] == pytest.approx(-1.0)
