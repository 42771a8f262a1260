"""Transverse-field XY chain through Jordan-Wigner fermions and Bogoliubov modes.

A down spin is a fermion: c+_j = S_j s-_j with S_j = prod_{m<j} (1 - 2 n_m).
The bond term becomes (Jx + Jy)(c+_j c_{j+1} + h.c.) + (Jx - Jy)(c+_j c+_{j+1} + h.c.)
and the field h(1 - 2 n_j).  On even rings the staggered gauge
c_j = (-1)^j ct_j turns the hopping sign so that the mode energy is
eps_q = (Jx + Jy) cos q + h and omega_q = 2 sqrt(eps_q^2 + (Jx - Jy)^2 sin^2 q).

Expectations in the one-fermion initial state are vacuum expectations
<0| P+ O ... P |0> of operators linear in ct_q and ct+_q, evaluated as a
Pfaffian of pair contractions.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import CriticalModeError, NormalizationError, SpinChainError
from .hilbert import RENORM_SLOP, ChainSpec
from .logger_config import setup_logger
from .measures import XStateRDM, sigma_pair_expectations
from .operations import MeasureType, compute_measure

logger = setup_logger(__name__)

CRITICAL_OMEGA = 1e-12
QUADRATURE_POINTS = 4096
POPULATION_SLOP = 1e-10


class XYParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Literal["xy"] = "xy"
    jx: float = 0.7
    jy: float = 0.3
    h: float = 1.0

    @model_validator(mode="after")
    def check_couplings(self):
        if self.jx == 0 and self.jy == 0:
            raise ValueError("At least one of jx, jy must be non-zero")
        return self

    @property
    def gamma(self) -> float:
        return self.jx - self.jy


class FermionParity(str, Enum):
    even = "even"
    odd = "odd"


@dataclass(frozen=True)
class ModeData:
    q: float
    omega: float
    u: float
    v: float


@dataclass(frozen=True)
class ModeEvolution:
    """ct_q(t) = chi ct_q + xi ct+_{-q}."""

    q: float
    t: float
    chi: complex
    xi: complex


@dataclass(frozen=True)
class CorrelatorSet:
    """Spin-basis fermion correlators on the bond (j, j+1) at time t."""

    j: int
    t: float
    occupation: float
    next_occupation: float
    hopping: complex
    pairing: complex
    density_density: float


def mode_energy(q, params: XYParams):
    return (params.jx + params.jy) * np.cos(q) + params.h


def dispersion(q, params: XYParams):
    """omega_q = 2 sqrt(eps_q^2 + ((Jx - Jy) sin q)^2)."""
    return 2.0 * np.hypot(mode_energy(q, params), params.gamma * np.sin(q))


def group_velocity(q, params: XYParams):
    omega = dispersion(q, params)
    safe = np.where(omega < CRITICAL_OMEGA, 1.0, omega)
    eps = mode_energy(q, params)
    slope = -eps * (params.jx + params.jy) * np.sin(q) + params.gamma**2 * np.sin(q) * np.cos(q)
    return np.where(omega < CRITICAL_OMEGA, 0.0, 4.0 * slope / safe)


def max_group_velocity(params: XYParams, points: int = QUADRATURE_POINTS) -> float:
    """Light-cone speed of the quasiparticles, max |d omega / dq| over the Brillouin zone."""
    return float(np.max(np.abs(group_velocity(quadrature_grid(points), params))))


def bogoliubov(q: float, params: XYParams) -> ModeData:
    omega = float(dispersion(q, params))
    if omega < CRITICAL_OMEGA:
        raise CriticalModeError(f"Gapless mode at q={q:.6g}")
    u_sq = min(1.0, max(0.0, 0.5 + float(mode_energy(q, params)) / omega))
    return ModeData(q, omega, float(np.sqrt(u_sq)), float(np.sqrt(1.0 - u_sq)))


def _mode_coefficients(q: np.ndarray, t: float, params: XYParams) -> tuple[np.ndarray, np.ndarray]:
    omega = dispersion(q, params)
    gapless = omega < CRITICAL_OMEGA
    safe = np.where(gapless, 1.0, omega)
    s = np.sin(omega * t)
    chi = np.cos(omega * t) + 1j * (2.0 * mode_energy(q, params) / safe) * s
    xi = -(2.0 * params.gamma * np.sin(q) / safe) * s
    chi = np.where(gapless, 1.0 + 0j, chi)
    xi = np.where(gapless, 0.0, xi)
    return chi, xi.astype(complex)


def mode_evolution(q: float, t: float, params: XYParams) -> ModeEvolution:
    """chi = cos wt + i (2 eps / w) sin wt, xi = -(2 gamma sin q / w) sin wt.

    Equivalently chi = u^2 e^{iwt} + v^2 e^{-iwt} and xi = -sgn(q) sgn(gamma) 2uv sin wt.
    """
    chi, xi = _mode_coefficients(np.array([q], dtype=float), t, params)
    return ModeEvolution(q, t, complex(chi[0]), complex(xi[0]))


def momentum_grid(n_sites: int, parity: FermionParity = FermionParity.odd) -> np.ndarray:
    """Allowed momenta in (-pi, pi] for the given fermion-parity sector.

    Odd parity is periodic (q = 2 pi m / N); even parity is antiperiodic (q = 2 pi (m + 1/2) / N).
    """
    shift = 0.0 if FermionParity(parity) == FermionParity.odd else 0.5
    q = 2 * np.pi * (np.arange(n_sites) + shift) / n_sites
    return np.where(q > np.pi + 1e-12, q - 2 * np.pi, q)


def quadrature_grid(points: int = QUADRATURE_POINTS) -> np.ndarray:
    """Midpoints on (0, pi) mirrored to (-pi, 0)."""
    half = (np.arange(points) + 0.5) * np.pi / points
    return np.concatenate([-half[::-1], half])


class _ModeTable:
    """Mode coefficients at one time, with weight w per momentum."""

    def __init__(self, q: np.ndarray, weight: float, t: float, params: XYParams):
        self.q = q
        self.weight = weight
        self.chi, self.xi = _mode_coefficients(q, t, params)
        self._root = np.sqrt(weight)

    def annihilator(self, site: int) -> tuple[np.ndarray, np.ndarray]:
        phase = self._root * np.exp(1j * self.q * site)
        return phase * self.chi, -np.conj(phase) * self.xi

    def creator(self, site: int) -> tuple[np.ndarray, np.ndarray]:
        return _dagger(self.annihilator(site))

    def state_operators(self, phi: dict[int, complex]):
        """P+ = sum phi*_a ct_a and P = sum phi_a ct+_a at t = 0."""
        a = sum(np.conj(amp) * self._root * np.exp(1j * self.q * site) for site, amp in phi.items())
        b = sum(amp * self._root * np.exp(-1j * self.q * site) for site, amp in phi.items())
        zero = np.zeros_like(self.q, dtype=complex)
        return (a, zero), (zero, b)


def _dagger(op: tuple[np.ndarray, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    return np.conj(op[1]), np.conj(op[0])


def pfaffian(matrix: np.ndarray) -> complex:
    """Pfaffian of an antisymmetric matrix of even order by expansion along the first row."""
    n = matrix.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        return 0j
    total = 0j
    rest = np.arange(1, n)
    for k in range(1, n):
        if matrix[0, k] == 0:
            continue
        keep = rest[rest != k]
        sign = 1.0 if k % 2 else -1.0
        total += sign * matrix[0, k] * pfaffian(matrix[np.ix_(keep, keep)])
    return total


def vacuum_expectation(operators: Sequence[tuple[np.ndarray, np.ndarray]]) -> complex:
    """Wick expectation in the ct vacuum; each operator is (coefficients on ct_q, on ct+_q)."""
    n = len(operators)
    contractions = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for k in range(i + 1, n):
            contractions[i, k] = np.dot(operators[i][0], operators[k][1])
            contractions[k, i] = -contractions[i, k]
    return pfaffian(contractions)


def _gauge_amplitudes(alpha: complex, beta: complex) -> dict[int, complex]:
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > RENORM_SLOP:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm:.15g}, expected 1")
    # c+_j = (-1)^j ct+_j
    return {1: -alpha, 2: beta}


def _check_bond(j: int, chain: ChainSpec) -> None:
    if chain.n_sites % 2:
        raise SpinChainError("Fermion path needs an even number of sites")
    if not 1 <= j <= chain.n_sites - 1:
        raise SpinChainError(
            f"Analytic correlators cover bonds (j, j+1) with 1 <= j <= {chain.n_sites - 1}, got j={j}; "
            "use the exact-diagonalization path for other pairs"
        )


def _modes(chain: ChainSpec, params: XYParams, t: float, quadrature: bool) -> _ModeTable:
    if quadrature:
        q = quadrature_grid()
    else:
        q = momentum_grid(chain.n_sites, FermionParity.odd)
    return _ModeTable(q, 1.0 / q.size, t, params)


def _bond_correlators(modes: _ModeTable, phi: dict[int, complex], j: int, t: float) -> CorrelatorSet:
    bra, ket = modes.state_operators(phi)
    cj, cj_dag = modes.annihilator(j), modes.creator(j)
    ck, ck_dag = modes.annihilator(j + 1), modes.creator(j + 1)

    def expect(*ops):
        return vacuum_expectation([bra, *ops, ket])

    # gauge signs: <c+_j c_{j+1}> = -<ct+_j ct_{j+1}>, same for the pair term
    return CorrelatorSet(
        j=j,
        t=t,
        occupation=float(expect(cj_dag, cj).real),
        next_occupation=float(expect(ck_dag, ck).real),
        hopping=complex(-expect(cj_dag, ck)),
        pairing=complex(-expect(cj_dag, ck_dag)),
        density_density=float(expect(cj_dag, cj, ck_dag, ck).real),
    )


def two_point_correlators(
    j: int,
    t: float,
    alpha: complex,
    beta: complex,
    chain: ChainSpec,
    params: XYParams,
    quadrature: bool = False,
) -> CorrelatorSet:
    """<n_j>, <n_{j+1}>, <c+_j c_{j+1}>, <c+_j c+_{j+1}> and <n_j n_{j+1}> for (alpha c+_1 + beta c+_2)|0>.

    With ``quadrature`` the momentum sums become integrals, i.e. the infinite chain.
    """
    _check_bond(j, chain)
    phi = _gauge_amplitudes(alpha, beta)
    return _bond_correlators(_modes(chain, params, t, quadrature), phi, j, t)


def density_density_correlator(
    j: int,
    t: float,
    alpha: complex,
    beta: complex,
    chain: ChainSpec,
    params: XYParams,
    quadrature: bool = False,
) -> complex:
    _check_bond(j, chain)
    modes = _modes(chain, params, t, quadrature)
    bra, ket = modes.state_operators(_gauge_amplitudes(alpha, beta))
    cj, ck = modes.annihilator(j), modes.annihilator(j + 1)
    return complex(vacuum_expectation([bra, _dagger(cj), cj, _dagger(ck), ck, ket]))


def _population(value: float) -> float:
    if value < -POPULATION_SLOP:
        raise SpinChainError(f"Negative population {value:.3e} from correlators")
    return max(value, 0.0)


def rdm_from_correlators(corr: CorrelatorSet) -> XStateRDM:
    nn = corr.density_density
    return XStateRDM(
        u=_population(1.0 - corr.occupation - corr.next_occupation + nn),
        v=_population(nn),
        w1=_population(corr.next_occupation - nn),
        w2=_population(corr.occupation - nn),
        x=corr.hopping,
        z=corr.pairing,
    )


def nn_rdm_xy(
    j: int,
    t: float,
    alpha: complex,
    beta: complex,
    chain: ChainSpec,
    params: XYParams,
    k: Optional[int] = None,
    quadrature: bool = False,
) -> XStateRDM:
    """X-state reduced density matrix of the bond (j, j+1)."""
    if k is not None and k != j + 1:
        raise SpinChainError(
            f"Analytic RDM only for nearest neighbours (j, j+1), got ({j}, {k}); use the exact path"
        )
    return rdm_from_correlators(two_point_correlators(j, t, alpha, beta, chain, params, quadrature))


def _bond_grid(chain: ChainSpec, params: XYParams, alpha, beta, times, threads, quadrature, cell):
    phi = _gauge_amplitudes(alpha, beta)
    bonds = range(1, chain.n_sites)
    _check_bond(1, chain)

    def column(t: float):
        modes = _modes(chain, params, t, quadrature)
        return [cell(_bond_correlators(modes, phi, j, t)) for j in bonds]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        columns = list(pool.map(column, list(times)))
    return columns


def xy_measure_grid(
    chain: ChainSpec,
    params: XYParams,
    alpha: complex,
    beta: complex,
    measure: MeasureType,
    times: Sequence[float],
    threads: int = 1,
    quadrature: bool = False,
) -> np.ndarray:
    """Nearest-neighbour measure with one row per bond (i, i+1) and one column per time."""
    measure = MeasureType(measure)
    if measure == MeasureType.tmi:
        raise SpinChainError("Tripartite information needs three sites; use the exact path for the XY chain")

    def cell(corr: CorrelatorSet) -> float:
        rho = rdm_from_correlators(corr).to_density_matrix((corr.j, corr.j + 1))
        return compute_measure(measure, rho, ((corr.j,), (corr.j + 1,)))

    columns = _bond_grid(chain, params, alpha, beta, times, threads, quadrature, cell)
    return np.array(columns, dtype=float).T.reshape(chain.n_sites - 1, len(times))


def correlator_grids(
    chain: ChainSpec,
    params: XYParams,
    alpha: complex,
    beta: complex,
    times: Sequence[float],
    threads: int = 1,
    quadrature: bool = False,
) -> dict[str, np.ndarray]:
    """Re<s+ s->, Re<s+ s+> and <sz sz> on every bond, keyed by correlator name."""
    def cell(corr: CorrelatorSet) -> dict[str, float]:
        return sigma_pair_expectations(rdm_from_correlators(corr).to_density_matrix((corr.j, corr.j + 1)))

    columns = _bond_grid(chain, params, alpha, beta, times, threads, quadrature, cell)
    names = columns[0][0].keys() if columns else ()
    return {
        name: np.array([[c[name] for c in col] for col in columns], dtype=float).T.reshape(
            chain.n_sites - 1, len(times)
        )
        for name in names
    }
