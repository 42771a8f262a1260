"""Magnon-number conserving dynamics: Heisenberg one/two-magnon sectors and the kicked Harper map.

The Heisenberg chain is H = -J sum (sx sx + sy sy + delta sz sz) on a ring.
With Pauli matrices a down spin hops with amplitude -2J, so the one-magnon
band is -4J cos p on top of the constant -J delta (N - 4).  The propagator
tables keep that constant as a separate global phase so the hopping part is
independent of delta.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import NormalizationError, SectorError, SizeLimitError, SpinChainError
from .hilbert import (
    RENORM_SLOP,
    ChainSpec,
    Sector,
    SectorAmplitudes,
    pair_list,
    pair_lookup,
    reduced_density_matrix,
)
from .logger_config import setup_logger
from .operations import MeasureType, Parties, compute_measure, parties_sites

logger = setup_logger(__name__)

TWO_MAGNON_MAX_SITES = 64
UNITARY_TOL = 1e-10


class HeisenbergParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Literal["heisenberg"] = "heisenberg"
    J: float = 1.0
    delta: float = 1.0

    @model_validator(mode="after")
    def check_coupling(self):
        if self.J == 0:
            raise ValueError("Exchange coupling J must be non-zero")
        return self


class HarperParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Literal["harper"] = "harper"
    g: float = 0.1
    tau: float = Field(0.1, gt=0)
    eta: int = 1


MagnonModel = Union[HeisenbergParams, HarperParams]

# The Harper hopping term -1/2 (sx sx + sy sy) is the Heisenberg hop at J = 1/2 without zz.
XX_HOPPING = HeisenbergParams(J=0.5, delta=0.0)


@dataclass(frozen=True)
class GreenTable:
    """One-magnon propagator; ``entries[x-1, x0-1]`` is G^x_{x0}(t) without the global phase."""

    chain: ChainSpec
    t: float
    entries: np.ndarray
    phase: complex = 1.0 + 0j

    def matrix(self) -> np.ndarray:
        return self.phase * self.entries

    def unitarity_error(self) -> float:
        g = self.entries
        return float(np.max(np.abs(g @ g.conj().T - np.eye(g.shape[0]))))

    def check_unitary(self, tol: float = UNITARY_TOL) -> None:
        if self.unitarity_error() > tol:
            raise SpinChainError(f"Propagator at t={self.t} not unitary")


@dataclass(frozen=True)
class TwoMagnonGreenTable:
    chain: ChainSpec
    params: HeisenbergParams
    t: float
    entries: np.ndarray

    def unitarity_error(self) -> float:
        g = self.entries
        return float(np.max(np.abs(g @ g.conj().T - np.eye(g.shape[0]))))


def vacuum_energy(chain: ChainSpec, params: HeisenbergParams) -> float:
    return -chain.n_sites * params.J * params.delta


def one_magnon_offset(chain: ChainSpec, params: HeisenbergParams) -> float:
    """Diagonal energy of any one-magnon state: two of the N bonds are antiparallel."""
    return -params.J * params.delta * (chain.n_sites - 4)


def one_magnon_band(p, params: HeisenbergParams):
    return -4.0 * params.J * np.cos(p)


def light_cone_velocity(params: HeisenbergParams) -> float:
    """Largest group velocity of the one-magnon band."""
    return 4.0 * abs(params.J)


def momenta(n_sites: int) -> np.ndarray:
    return 2 * np.pi * np.arange(1, n_sites + 1) / n_sites


def one_magnon_propagator(chain: ChainSpec, params: HeisenbergParams, t: float) -> GreenTable:
    n = chain.n_sites
    p = momenta(n)
    evolution = np.exp(-1j * one_magnon_band(p, params) * t)
    distance = np.arange(n)
    kernel = np.exp(1j * np.outer(distance, p)) @ evolution / n
    offsets = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return GreenTable(chain, t, kernel[offsets], np.exp(-1j * one_magnon_offset(chain, params) * t))


def _unit_pair(alpha: complex, beta: complex) -> None:
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > RENORM_SLOP:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm:.15g}, expected 1")


def one_magnon_initial(chain: ChainSpec, alpha: complex, beta: complex) -> SectorAmplitudes:
    """alpha |10...0> + beta |010...0>."""
    _unit_pair(alpha, beta)
    omega = np.zeros(chain.n_sites, dtype=complex)
    omega[:2] = alpha, beta
    return SectorAmplitudes(chain, Sector.one_magnon, omega)


def vacuum_two_magnon_initial(chain: ChainSpec, alpha: complex, beta: complex) -> SectorAmplitudes:
    """alpha |00...0> + beta |110...0>."""
    _unit_pair(alpha, beta)
    amps = np.zeros(1 + len(pair_list(chain.n_sites)), dtype=complex)
    amps[0] = alpha
    amps[1 + pair_lookup(chain.n_sites)[0, 1]] = beta
    return SectorAmplitudes(chain, Sector.vacuum_plus_two_magnon, amps)


def evolve_one_magnon(alpha: complex, beta: complex, chain: ChainSpec, params: HeisenbergParams, t: float) -> SectorAmplitudes:
    _unit_pair(alpha, beta)
    g = one_magnon_propagator(chain, params, t).matrix()
    return SectorAmplitudes(chain, Sector.one_magnon, alpha * g[:, 0] + beta * g[:, 1])


def two_magnon_hamiltonian(chain: ChainSpec, params: HeisenbergParams) -> np.ndarray:
    """Heisenberg Hamiltonian restricted to pairs x1 < x2 of down spins."""
    n = chain.n_sites
    if n > TWO_MAGNON_MAX_SITES:
        raise SizeLimitError(f"Two-magnon sector limited to N <= {TWO_MAGNON_MAX_SITES}, got {n}")
    pairs = pair_list(n)
    lookup = pair_lookup(n)
    h = np.zeros((len(pairs), len(pairs)), dtype=complex)
    for k, (a, b) in enumerate(pairs):
        spins = np.ones(n)
        spins[[a - 1, b - 1]] = -1.0
        h[k, k] = -params.J * params.delta * np.sum(spins * np.roll(spins, -1))
        for mover, other in ((a, b), (b, a)):
            for step in (-1, 1):
                target = (mover - 1 + step) % n + 1
                if target != other:
                    h[lookup[target - 1, other - 1], k] += -2.0 * params.J
    return h


@lru_cache(maxsize=32)
def _two_magnon_eigensystem(chain: ChainSpec, params: HeisenbergParams) -> tuple[np.ndarray, np.ndarray]:
    logger.debug(f"Diagonalizing two-magnon sector for N={chain.n_sites}, {params!r}")
    return np.linalg.eigh(two_magnon_hamiltonian(chain, params))


def two_magnon_propagator(chain: ChainSpec, params: HeisenbergParams, t: float) -> TwoMagnonGreenTable:
    values, vectors = _two_magnon_eigensystem(chain, params)
    entries = (vectors * np.exp(-1j * values * t)[None, :]) @ vectors.conj().T
    return TwoMagnonGreenTable(chain, params, t, entries)


def _evolve_pairs(chain: ChainSpec, params: HeisenbergParams, pairs: np.ndarray, t: float) -> np.ndarray:
    values, vectors = _two_magnon_eigensystem(chain, params)
    return vectors @ (np.exp(-1j * values * t) * (vectors.conj().T @ pairs))


def evolve_vacuum_two_magnon(alpha: complex, beta: complex, chain: ChainSpec, params: HeisenbergParams, t: float) -> SectorAmplitudes:
    return evolve_sector(vacuum_two_magnon_initial(chain, alpha, beta), params, t)


def harper_step(chain: ChainSpec, params: HarperParams) -> GreenTable:
    """One period: site-dependent kick phase first, then XX hopping for time tau."""
    n = chain.n_sites
    site_field = np.cos(2 * np.pi * params.eta * np.arange(1, n + 1) / n)
    hop = one_magnon_propagator(chain, XX_HOPPING, params.tau)
    kick = np.exp(2j * params.tau * params.g * site_field)
    global_phase = np.exp(-1j * params.tau * params.g * site_field.sum())
    return GreenTable(chain, params.tau, hop.entries * kick[None, :], hop.phase * global_phase)


def kick_count(params: HarperParams, t: float) -> int:
    return int(round(t / params.tau))


def harper_propagator(chain: ChainSpec, params: HarperParams, n_kicks: int) -> GreenTable:
    if n_kicks < 0:
        raise SpinChainError("Kick count must be non-negative")
    step = harper_step(chain, params)
    return GreenTable(
        chain,
        n_kicks * params.tau,
        np.linalg.matrix_power(step.entries, n_kicks),
        step.phase ** n_kicks,
    )


def one_magnon_evolution_operator(chain: ChainSpec, model: MagnonModel, t: float) -> GreenTable:
    """Heisenberg propagator at time t, or the Harper map after round(t / tau) kicks."""
    if isinstance(model, HeisenbergParams):
        return one_magnon_propagator(chain, model, t)
    if isinstance(model, HarperParams):
        return harper_propagator(chain, model, kick_count(model, t))
    raise SpinChainError(f"{type(model).__name__} does not conserve magnon number")


def evolve_sector(amps: SectorAmplitudes, model: MagnonModel, t: float) -> SectorAmplitudes:
    chain = amps.chain
    if amps.sector == Sector.one_magnon:
        g = one_magnon_evolution_operator(chain, model, t).matrix()
        return SectorAmplitudes(chain, Sector.one_magnon, g @ amps.amplitudes)
    if not isinstance(model, HeisenbergParams):
        raise SectorError("Vacuum-plus-two-magnon evolution is available for the Heisenberg chain only")
    vacuum = amps.amplitudes[0] * np.exp(-1j * vacuum_energy(chain, model) * t)
    pairs = _evolve_pairs(chain, model, amps.amplitudes[1:], t)
    return SectorAmplitudes(chain, amps.sector, np.concatenate([[vacuum], pairs]))


def nearest_neighbour_parties(chain: ChainSpec) -> list[Parties]:
    return [((i,), (i + 1,)) for i in range(1, chain.n_sites)]


def measure_grid(
    chain: ChainSpec,
    model: MagnonModel,
    initial: SectorAmplitudes,
    measure: MeasureType,
    parties: Sequence[Parties],
    times: Sequence[float],
    threads: int = 1,
) -> np.ndarray:
    """Measure values with one row per party tuple and one column per time."""
    if initial.chain != chain:
        raise SpinChainError("Initial state lives on a different chain")
    if not parties:
        raise SpinChainError("No parties requested")

    def column(t: float) -> list[float]:
        state = evolve_sector(initial, model, t)
        return [
            compute_measure(measure, reduced_density_matrix(state, parties_sites(p)), p)
            for p in parties
        ]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        columns = list(pool.map(column, list(times)))
    return np.array(columns, dtype=float).T.reshape(len(parties), len(times))
