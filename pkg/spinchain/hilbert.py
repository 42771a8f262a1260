"""Basis bookkeeping, state containers and reduced density matrices.

Sites are 1-based. Bit ``j - 1`` of a basis index is set when site ``j``
carries a down spin, so ``|0...0>`` (all up) is index 0.  A density matrix
records the chain site of each of its tensor factors in ``sites``, most
significant factor first; a full-chain matrix therefore has labels
``(N, N-1, ..., 1)`` and a reduced matrix keeps the order it was asked for.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, singledispatch
from itertools import combinations
from typing import Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import NormalizationError, SectorError, SizeLimitError, SpinChainError

NORM_TOL = 1e-12
RENORM_SLOP = 1e-9
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
EMBED_LIMIT = 14

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# |1><0| flips up to down
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()


class ChainSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_sites: int = Field(20, ge=3)
    boundary: Literal["periodic"] = "periodic"

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    def check_site(self, site: int) -> int:
        if not 1 <= site <= self.n_sites:
            raise SpinChainError(f"Site {site} outside chain of {self.n_sites} sites")
        return site

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour bonds (j, j+1) including the closing bond (N, 1)."""
        n = self.n_sites
        return [(j, j % n + 1) for j in range(1, n + 1)]


class Sector(str, Enum):
    one_magnon = "one_magnon"
    vacuum_plus_two_magnon = "vacuum_plus_two_magnon"


@lru_cache(maxsize=None)
def pair_list(n_sites: int) -> tuple[tuple[int, int], ...]:
    """Ordered pairs x1 < x2 (1-based) in the order used by two-magnon vectors."""
    return tuple(combinations(range(1, n_sites + 1), 2))


@lru_cache(maxsize=None)
def pair_lookup(n_sites: int) -> np.ndarray:
    """Symmetric N x N table of pair positions; -1 on the diagonal."""
    table = -np.ones((n_sites, n_sites), dtype=int)
    for k, (a, b) in enumerate(pair_list(n_sites)):
        table[a - 1, b - 1] = table[b - 1, a - 1] = k
    return table


def configuration_index(down_positions: Sequence[int], chain: ChainSpec) -> int:
    positions = list(down_positions)
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise SpinChainError(f"Down positions must be strictly increasing: {positions}")
    index = 0
    for site in positions:
        chain.check_site(site)
        index |= 1 << (site - 1)
    return index


def configuration_sites(index: int, chain: ChainSpec) -> tuple[int, ...]:
    if not 0 <= index < chain.dim:
        raise SpinChainError(f"Basis index {index} outside 2^{chain.n_sites}")
    return tuple(j for j in range(1, chain.n_sites + 1) if index >> (j - 1) & 1)


@lru_cache(maxsize=None)
def popcounts(n_sites: int) -> np.ndarray:
    idx = np.arange(2 ** n_sites)
    counts = np.zeros_like(idx)
    for j in range(n_sites):
        counts += (idx >> j) & 1
    return counts


def _normalized(amplitudes: np.ndarray, what: str) -> np.ndarray:
    norm = float(np.vdot(amplitudes, amplitudes).real)
    if abs(norm - 1.0) <= NORM_TOL:
        return amplitudes
    if abs(norm - 1.0) <= RENORM_SLOP:
        return amplitudes / np.sqrt(norm)
    raise NormalizationError(f"{what} has squared norm {norm:.15g}, expected 1")


@dataclass(frozen=True)
class SectorAmplitudes:
    """Amplitudes over the one-magnon or vacuum-plus-two-magnon basis.

    The vacuum-plus-two-magnon vector is ``[vacuum, pairs...]`` with pairs in
    ``pair_list`` order.
    """

    chain: ChainSpec
    sector: Sector
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = self.chain.n_sites
        expected = n if self.sector == Sector.one_magnon else 1 + n * (n - 1) // 2
        if amps.size != expected:
            raise SpinChainError(
                f"{self.sector.value} vector needs {expected} amplitudes, got {amps.size}"
            )
        amps = _normalized(amps, f"{self.sector.value} amplitudes")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def vacuum(self) -> complex:
        self._require(Sector.vacuum_plus_two_magnon)
        return complex(self.amplitudes[0])

    def pair_matrix(self) -> np.ndarray:
        """Symmetric N x N matrix of pair amplitudes, zero on the diagonal."""
        self._require(Sector.vacuum_plus_two_magnon)
        n = self.chain.n_sites
        table = pair_lookup(n)
        matrix = np.zeros((n, n), dtype=complex)
        off = table >= 0
        matrix[off] = self.amplitudes[1:][table[off]]
        return matrix

    def _require(self, sector: Sector) -> None:
        if self.sector != sector:
            raise SectorError(f"Expected {sector.value} amplitudes, got {self.sector.value}")


@dataclass(frozen=True)
class PureState:
    chain: ChainSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size != self.chain.dim:
            raise SpinChainError(f"State needs {self.chain.dim} amplitudes, got {amps.size}")
        amps = _normalized(amps, "state")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis_state(cls, chain: ChainSpec, down_positions: Sequence[int] = ()) -> "PureState":
        amps = np.zeros(chain.dim, dtype=complex)
        amps[configuration_index(down_positions, chain)] = 1.0
        return cls(chain, amps)


@dataclass(frozen=True)
class DensityMatrix:
    elements: np.ndarray
    sites: tuple[int, ...] = field(default=())

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise SpinChainError(f"Density matrix must be square, got shape {rho.shape}")
        sites = tuple(self.sites)
        if not sites:
            n_qubits = int(round(np.log2(rho.shape[0])))
            sites = tuple(range(1, n_qubits + 1))
        if rho.shape[0] != 2 ** len(sites) or len(set(sites)) != len(sites):
            raise SpinChainError(f"Dimension {rho.shape[0]} does not match site labels {sites}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise SpinChainError("Density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > HERMITIAN_TOL:
            raise NormalizationError(f"Density matrix trace {trace:.15g}, expected 1")
        rho = 0.5 * (rho + rho.conj().T)
        rho.setflags(write=False)
        object.__setattr__(self, "elements", rho)
        object.__setattr__(self, "sites", sites)
        self.check_psd()

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def n_qubits(self) -> int:
        return len(self.sites)

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()), full_chain_labels(state.chain.n_sites))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)

    def check_psd(self) -> None:
        # a Cholesky factor of rho + tol*I exists exactly when no eigenvalue is below -tol
        try:
            np.linalg.cholesky(self.elements + PSD_TOL * np.eye(self.dim))
            return
        except np.linalg.LinAlgError:
            pass
        lowest = float(self.eigenvalues()[0])
        if lowest < -PSD_TOL:
            raise SpinChainError(f"Density matrix has negative eigenvalue {lowest:.3e}")


State = Union[SectorAmplitudes, PureState]


@dataclass(frozen=True)
class BranchMixture:
    """Weighted pure branches: rho = sum_k w_k |psi_k><psi_k|."""

    chain: ChainSpec
    branches: tuple[tuple[float, State], ...]

    def __post_init__(self):
        weights = np.array([w for w, _ in self.branches], dtype=float)
        if weights.size == 0 or np.any(weights < -NORM_TOL):
            raise SpinChainError("Mixture needs non-negative branch weights")
        if abs(weights.sum() - 1.0) > HERMITIAN_TOL:
            raise NormalizationError(f"Branch weights sum to {weights.sum():.15g}")

    @classmethod
    def from_unnormalized(
        cls, chain: ChainSpec, branches: Sequence[tuple[np.ndarray, Sector | None]]
    ) -> "BranchMixture":
        """Build from raw branch vectors (Born-rule outputs); empty branches are dropped.

        A sector of ``None`` means a full-space vector.
        """
        kept = []
        for vector, sector in branches:
            weight = float(np.vdot(vector, vector).real)
            if weight <= 1e-15:
                continue
            unit = vector / np.sqrt(weight)
            state = PureState(chain, unit) if sector is None else SectorAmplitudes(chain, sector, unit)
            kept.append((weight, state))
        total = sum(w for w, _ in kept)
        return cls(chain, tuple((w / total, s) for w, s in kept))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.branches])


def full_chain_labels(n_sites: int) -> tuple[int, ...]:
    return tuple(range(n_sites, 0, -1))


def _check_keep(keep: Sequence[int], n_sites: int) -> list[int]:
    keep = list(keep)
    if not keep:
        raise SpinChainError("Partial trace needs at least one site to keep")
    if len(set(keep)) != len(keep) or any(not 1 <= s <= n_sites for s in keep):
        raise SpinChainError(f"Invalid sites {keep} for a {n_sites}-site chain")
    return keep


def embed(amps: SectorAmplitudes) -> PureState:
    chain = amps.chain
    n = chain.n_sites
    if n > EMBED_LIMIT:
        raise SizeLimitError(f"Full-space embedding limited to N <= {EMBED_LIMIT}, got {n}")
    psi = np.zeros(chain.dim, dtype=complex)
    if amps.sector == Sector.one_magnon:
        psi[1 << np.arange(n)] = amps.amplitudes
    else:
        psi[0] = amps.amplitudes[0]
        for k, (a, b) in enumerate(pair_list(n)):
            psi[(1 << (a - 1)) | (1 << (b - 1))] = amps.amplitudes[1 + k]
    return PureState(chain, psi)


@singledispatch
def partial_trace(state, keep: Sequence[int]) -> DensityMatrix:
    raise SpinChainError(f"Cannot trace a {type(state).__name__}")


@partial_trace.register
def _(state: PureState, keep: Sequence[int]) -> DensityMatrix:
    n = state.chain.n_sites
    keep = _check_keep(keep, n)
    psi = state.amplitudes.reshape((2,) * n)
    kept_axes = [n - s for s in keep]
    rest = [a for a in range(n) if a not in kept_axes]
    m = np.transpose(psi, kept_axes + rest).reshape(2 ** len(keep), -1)
    return DensityMatrix(m @ m.conj().T, tuple(keep))


@partial_trace.register
def _(state: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    labels = state.sites
    keep = list(keep)
    if not keep or len(set(keep)) != len(keep) or any(s not in labels for s in keep):
        raise SpinChainError(f"Cannot keep {keep} from a matrix over sites {labels}")
    k = len(labels)
    kept_axes = [labels.index(s) for s in keep]
    rest = [a for a in range(k) if a not in kept_axes]
    perm = kept_axes + rest + [k + a for a in kept_axes] + [k + a for a in rest]
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    t = state.elements.reshape((2,) * (2 * k)).transpose(perm).reshape(dk, dr, dk, dr)
    return DensityMatrix(np.einsum("arbr->ab", t), tuple(keep))


def _subset_sites(sites: Sequence[int], n_sites: int) -> list[int]:
    sites = _check_keep(sites, n_sites)
    if len(sites) > 3:
        raise SpinChainError(f"Closed-form RDMs cover one to three sites, got {len(sites)}")
    return sites


def rdm_one_magnon(amps: SectorAmplitudes, sites: Sequence[int]) -> DensityMatrix:
    amps._require(Sector.one_magnon)
    sites = _subset_sites(sites, amps.chain.n_sites)
    m = len(sites)
    omega = amps.amplitudes[[s - 1 for s in sites]]
    single = [1 << (m - 1 - i) for i in range(m)]
    rho = np.zeros((2 ** m, 2 ** m), dtype=complex)
    rho[0, 0] = 1.0 - np.sum(np.abs(omega) ** 2)
    rho[np.ix_(single, single)] = np.outer(omega, omega.conj())
    return DensityMatrix(rho, tuple(sites))


def rdm_vacuum_two_magnon(amps: SectorAmplitudes, sites: Sequence[int]) -> DensityMatrix:
    amps._require(Sector.vacuum_plus_two_magnon)
    n = amps.chain.n_sites
    sites = _subset_sites(sites, n)
    m = len(sites)
    inside = [s - 1 for s in sites]
    outside = [x for x in range(n) if x not in inside]
    pairs = amps.pair_matrix()
    vacuum = amps.vacuum

    rho = np.zeros((2 ** m, 2 ** m), dtype=complex)
    out_block = pairs[np.ix_(outside, outside)]
    rho[0, 0] = abs(vacuum) ** 2 + 0.5 * np.sum(np.abs(out_block) ** 2)

    # one down spin inside, the partner outside
    single = [1 << (m - 1 - i) for i in range(m)]
    partner = pairs[np.ix_(inside, outside)]
    rho[np.ix_(single, single)] = partner @ partner.conj().T

    # both down spins inside; coherent with the vacuum
    doubles = [
        (single[i] | single[k], pairs[inside[i], inside[k]])
        for i, k in combinations(range(m), 2)
    ]
    if doubles:
        idx = [d for d, _ in doubles]
        amp = np.array([a for _, a in doubles])
        rho[np.ix_(idx, idx)] = np.outer(amp, amp.conj())
        rho[0, idx] = vacuum * amp.conj()
        rho[idx, 0] = np.conj(vacuum) * amp
    return DensityMatrix(rho, tuple(sites))


@singledispatch
def reduced_density_matrix(state, sites: Sequence[int]) -> DensityMatrix:
    return partial_trace(state, sites)


@reduced_density_matrix.register
def _(state: SectorAmplitudes, sites: Sequence[int]) -> DensityMatrix:
    if state.sector == Sector.one_magnon:
        return rdm_one_magnon(state, sites)
    return rdm_vacuum_two_magnon(state, sites)


@reduced_density_matrix.register
def _(state: BranchMixture, sites: Sequence[int]) -> DensityMatrix:
    rho = sum(w * reduced_density_matrix(s, sites).elements for w, s in state.branches)
    return DensityMatrix(rho, tuple(sites))


def apply_to_ket(psi: np.ndarray, n_sites: int, site: int, op: np.ndarray) -> np.ndarray:
    """Apply a 2x2 operator to one site of a full-space vector (no renormalization)."""
    axis = n_sites - site
    t = np.asarray(psi, dtype=complex).reshape((2,) * n_sites)
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def apply_to_density(rho: DensityMatrix, site: int, op: np.ndarray) -> np.ndarray:
    """Return op_site rho op_site^dagger as a raw matrix."""
    if site not in rho.sites:
        raise SpinChainError(f"Site {site} not among {rho.sites}")
    k = rho.n_qubits
    axis = rho.sites.index(site)
    t = rho.elements.reshape((2,) * (2 * k))
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)
    t = np.moveaxis(np.tensordot(op.conj(), t, axes=([1], [k + axis])), 0, k + axis)
    return t.reshape(rho.dim, rho.dim)


def apply_site_operator(state, site: int, op: np.ndarray) -> np.ndarray:
    """op on one site of a ket, or op rho op^dagger for a density matrix; raw result."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise SpinChainError(f"Site operator must be 2x2, got {op.shape}")
    if isinstance(state, PureState):
        state.chain.check_site(site)
        return apply_to_ket(state.amplitudes, state.chain.n_sites, site, op)
    if isinstance(state, DensityMatrix):
        return apply_to_density(state, site, op)
    raise SpinChainError(f"Cannot apply a site operator to {type(state).__name__}")


def _full_diagonal(state) -> np.ndarray:
    if isinstance(state, PureState):
        return np.abs(state.amplitudes) ** 2
    if isinstance(state, DensityMatrix):
        return np.diag(state.elements).real
    if isinstance(state, SectorAmplitudes):
        return np.abs(embed(state).amplitudes) ** 2
    raise SpinChainError(f"No basis populations for {type(state).__name__}")


def sector_weights(state) -> dict[str, float]:
    """Weight of the even and odd down-spin parity sectors."""
    if isinstance(state, BranchMixture):
        total = {"even": 0.0, "odd": 0.0}
        for w, branch in state.branches:
            for key, value in sector_weights(branch).items():
                total[key] += w * value
        return total
    if isinstance(state, SectorAmplitudes):
        if state.sector == Sector.one_magnon:
            return {"even": 0.0, "odd": 1.0}
        return {"even": 1.0, "odd": 0.0}
    populations = _full_diagonal(state)
    n = int(round(np.log2(populations.size)))
    odd = float(populations[popcounts(n) % 2 == 1].sum())
    return {"even": float(populations.sum()) - odd, "odd": odd}


def total_down_expectation(state) -> float:
    """Expected number of down spins, sum_j <n_j>."""
    if isinstance(state, BranchMixture):
        return float(sum(w * total_down_expectation(s) for w, s in state.branches))
    if isinstance(state, SectorAmplitudes):
        return 1.0 if state.sector == Sector.one_magnon else 2.0 * (1.0 - abs(state.vacuum) ** 2)
    populations = _full_diagonal(state)
    n = int(round(np.log2(populations.size)))
    return float(populations @ popcounts(n))


def total_magnetization(state, n_sites: int) -> float:
    """sum_j <sigma^z_j> = N - 2 <N_down>."""
    return float(n_sites - 2.0 * total_down_expectation(state))


def parity_expectation(state) -> float:
    """<prod_j sigma^z_j> = even weight minus odd weight."""
    weights = sector_weights(state)
    return weights["even"] - weights["odd"]
