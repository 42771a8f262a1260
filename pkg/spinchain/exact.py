"""Exact diagonalization of the three chain models on small rings.

Every analytic path in the package is checked against the dense matrices
built here.
"""
import threading
from concurrent.futures import Future
from dataclasses import dataclass
from typing import Callable, Hashable, Literal, Optional, Sequence, Union

import numpy as np

from .errors import SizeLimitError, SpinChainError
from .fermions import XYParams
from .hilbert import ChainSpec, DensityMatrix, PureState, partial_trace, popcounts
from .logger_config import setup_logger
from .magnons import HarperParams, HeisenbergParams, kick_count
from .operations import MeasureType, Parties, compute_measure, parties_sites

logger = setup_logger(__name__)

MAX_SITES = 12
MAX_SECTOR_DIM = 4096
JACOBI_LIMIT = 64
JACOBI_TOL = 1e-13

ModelParams = Union[HeisenbergParams, XYParams, HarperParams]
Solver = Literal["lapack", "jacobi"]


@dataclass(frozen=True)
class HamiltonianMatrix:
    model: ModelParams
    chain: ChainSpec
    matrix: np.ndarray
    basis: np.ndarray
    sector: Optional[int] = None


@dataclass(frozen=True)
class StepUnitary:
    """One Floquet period of the kicked model, kick applied first."""

    model: HarperParams
    chain: ChainSpec
    matrix: np.ndarray
    basis: np.ndarray
    sector: Optional[int] = None


def sector_indices(n_sites: int, n_down: int) -> np.ndarray:
    if n_sites <= 20:
        return np.flatnonzero(popcounts(n_sites) == n_down)
    raise SizeLimitError(f"Sector enumeration limited to N <= 20, got {n_sites}")


def _basis_for(chain: ChainSpec, sector: Optional[int]) -> np.ndarray:
    n = chain.n_sites
    if sector is None:
        if n > MAX_SITES:
            raise SizeLimitError(f"Full-space ED limited to N <= {MAX_SITES}, got {n}")
        return np.arange(chain.dim)
    basis = sector_indices(n, sector)
    if basis.size > MAX_SECTOR_DIM:
        raise SizeLimitError(f"Sector dimension {basis.size} above {MAX_SECTOR_DIM}")
    return basis


def _coupling_matrix(
    chain: ChainSpec,
    basis: np.ndarray,
    flip_same: float,
    flip_differ: float,
    zz: float,
    field: np.ndarray,
) -> np.ndarray:
    """sum over bonds of exchange terms written through their action on bit pairs.

    ``flip_same`` / ``flip_differ`` are the amplitudes for flipping both spins of
    a bond when they are parallel / antiparallel; ``zz`` multiplies
    sigma^z sigma^z and ``field[j-1]`` multiplies sigma^z_j.
    """
    dim = basis.size
    matrix = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    diagonal = np.zeros(dim)
    for i, j in chain.bonds():
        bit_i = (basis >> (i - 1)) & 1
        bit_j = (basis >> (j - 1)) & 1
        diagonal += zz * (1 - 2 * bit_i) * (1 - 2 * bit_j)
        amplitude = np.where(bit_i == bit_j, flip_same, flip_differ)
        targets = basis ^ ((1 << (i - 1)) | (1 << (j - 1)))
        rows = np.searchsorted(basis, targets)
        rows = np.minimum(rows, dim - 1)
        inside = (basis[rows] == targets) & (amplitude != 0)
        if np.any((amplitude != 0) & ~inside):
            raise SpinChainError("Model does not conserve the requested sector")
        np.add.at(matrix, (rows[inside], cols[inside]), amplitude[inside])
    for j in range(1, chain.n_sites + 1):
        if field[j - 1] != 0:
            diagonal += field[j - 1] * (1 - 2 * ((basis >> (j - 1)) & 1))
    matrix[cols, cols] += diagonal
    return matrix


def harper_kick_field(chain: ChainSpec, params: HarperParams) -> np.ndarray:
    sites = np.arange(1, chain.n_sites + 1)
    return params.g * np.cos(2 * np.pi * sites * params.eta / chain.n_sites)


def build_hamiltonian(
    model: ModelParams, chain: ChainSpec, sector: Optional[int] = None
) -> Union[HamiltonianMatrix, StepUnitary]:
    """Dense Hamiltonian (or Harper step unitary) on the full space or a fixed-magnon sector."""
    basis = _basis_for(chain, sector)
    n = chain.n_sites
    no_field = np.zeros(n)
    if isinstance(model, HeisenbergParams):
        matrix = _coupling_matrix(chain, basis, 0.0, -2.0 * model.J, -model.J * model.delta, no_field)
        return HamiltonianMatrix(model, chain, matrix, basis, sector)
    if isinstance(model, XYParams):
        if sector is not None and model.jx != model.jy:
            raise SpinChainError("Anisotropic XY does not conserve magnon number")
        matrix = _coupling_matrix(
            chain, basis, model.jx - model.jy, model.jx + model.jy, 0.0, np.full(n, model.h)
        )
        return HamiltonianMatrix(model, chain, matrix, basis, sector)
    if isinstance(model, HarperParams):
        hop = _coupling_matrix(chain, basis, 0.0, -1.0, 0.0, no_field)
        kick = _coupling_matrix(chain, basis, 0.0, 0.0, 0.0, harper_kick_field(chain, model))
        hop_step = eigh_hermitian(hop).propagator(model.tau)
        step = hop_step * np.exp(-1j * model.tau * np.diag(kick).real)[None, :]
        return StepUnitary(model, chain, step, basis, sector)
    raise SpinChainError(f"Unknown model {type(model).__name__}")


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def propagator(self, t: float) -> np.ndarray:
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)[None, :]) @ v.conj().T

    def evolve(self, vector: np.ndarray, t: float) -> np.ndarray:
        coeff = self.eigenvectors.conj().T @ vector
        return self.eigenvectors @ (np.exp(-1j * self.eigenvalues * t) * coeff)

    def evolve_many(self, vector: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Rows are the state at each time."""
        coeff = self.eigenvectors.conj().T @ vector
        phases = np.exp(-1j * np.outer(self.eigenvalues, np.asarray(times, dtype=float)))
        return (self.eigenvectors @ (phases * coeff[:, None])).T


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    lead = np.argmax(np.abs(vectors), axis=0)
    phase = vectors[lead, np.arange(vectors.shape[1])]
    return vectors * (np.abs(phase) / phase)[None, :]


def _jacobi_symmetric(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 60):
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        logger.warning(f"Jacobi stopped after {max_sweeps} sweeps, off-norm {off:.2e}")
    return np.diag(a).copy(), v


def _jacobi_hermitian(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi on the real embedding [[X, -Y], [Y, X]] of H = X + iY."""
    n = matrix.shape[0]
    x, y = matrix.real, matrix.imag
    values, vectors = _jacobi_symmetric(np.block([[x, -y], [y, x]]))
    order = np.argsort(values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    candidates = vectors[:n] + 1j * vectors[n:]

    eigenvalues, eigenvectors = [], []
    start = 0
    while start < 2 * n:
        stop = start + 1
        scale = max(1.0, abs(values[start]))
        while stop < 2 * n and values[stop] - values[stop - 1] < 1e-8 * scale:
            stop += 1
        u, sing, _ = np.linalg.svd(candidates[:, start:stop], full_matrices=False)
        rank = int(np.sum(sing > 0.5))
        eigenvectors.append(u[:, :rank])
        eigenvalues.extend([float(np.mean(values[start:stop]))] * rank)
        start = stop
    return np.array(eigenvalues), np.hstack(eigenvectors)


def eigh_hermitian(matrix: np.ndarray, solver: Solver = "lapack") -> EigenDecomposition:
    matrix = np.asarray(matrix, dtype=complex)
    if solver == "jacobi":
        if matrix.shape[0] > JACOBI_LIMIT:
            raise SizeLimitError(f"Jacobi solver limited to dim <= {JACOBI_LIMIT}")
        values, vectors = _jacobi_hermitian(matrix)
    elif solver == "lapack":
        values, vectors = np.linalg.eigh(matrix)
    else:
        raise SpinChainError(f"Unknown eigensolver {solver!r}")
    return EigenDecomposition(values, _fix_phases(vectors))


class DecompositionCache:
    """Thread-safe memo of decompositions; concurrent requests for one key build once."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[Hashable, Future] = {}

    def get(self, key: Hashable, build: Callable[[], object]):
        with self._lock:
            future = self._entries.get(key)
            owner = future is None
            if owner:
                future = Future()
                self._entries[key] = future
        if owner:
            try:
                future.set_result(build())
            except BaseException as exc:
                future.set_exception(exc)
                with self._lock:
                    self._entries.pop(key, None)
                raise
        return future.result()

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)


_CACHE = DecompositionCache()


def cached_operator(model: ModelParams, chain: ChainSpec, sector: Optional[int] = None, solver: Solver = "lapack"):
    """Eigendecomposition of a Hamiltonian, or the step unitary of the kicked model."""
    def build():
        logger.debug(f"Building ED operator for {model!r} on N={chain.n_sites}, sector={sector}")
        operator = build_hamiltonian(model, chain, sector)
        if isinstance(operator, StepUnitary):
            return operator
        return eigh_hermitian(operator.matrix, solver)

    return _CACHE.get((model, chain, sector, solver), build)


def evolve_exact(
    state, hamiltonian: Union[HamiltonianMatrix, StepUnitary], t: float, solver: Solver = "lapack"
):
    """Apply exp(-iHt) (or the stroboscopic power of a step) to a state.

    The given matrix is diagonalized with ``solver``; use ``ExactDynamics`` to
    evolve many states under one cached decomposition.
    """
    dim = hamiltonian.basis.size
    vector_or_matrix = state.amplitudes if isinstance(state, PureState) else None
    if isinstance(state, DensityMatrix):
        vector_or_matrix = state.elements
    elif vector_or_matrix is None:
        vector_or_matrix = np.asarray(state, dtype=complex)
    if vector_or_matrix.shape[0] != dim:
        raise SpinChainError(f"State dimension {vector_or_matrix.shape[0]} != operator dimension {dim}")

    if isinstance(hamiltonian, StepUnitary):
        n_kicks = kick_count(hamiltonian.model, t)
        if n_kicks < 0:
            raise SpinChainError("Stroboscopic evolution runs forward only")
        unitary = np.linalg.matrix_power(hamiltonian.matrix, n_kicks)
    else:
        unitary = eigh_hermitian(hamiltonian.matrix, solver).propagator(t)

    if isinstance(state, DensityMatrix):
        return DensityMatrix(unitary @ state.elements @ unitary.conj().T, state.sites)
    evolved = unitary @ vector_or_matrix
    if isinstance(state, PureState):
        return PureState(state.chain, evolved)
    return evolved


class ExactDynamics:
    """Full-space time evolution of one model on one chain."""

    def __init__(self, model: ModelParams, chain: ChainSpec, solver: Solver = "lapack"):
        self.model = model
        self.chain = chain
        self.solver = solver
        self._operator = cached_operator(model, chain, None, solver)

    @property
    def stroboscopic(self) -> bool:
        return isinstance(self._operator, StepUnitary)

    def evolve(self, vector: np.ndarray, t: float) -> np.ndarray:
        if self.stroboscopic:
            out = np.asarray(vector, dtype=complex)
            for _ in range(kick_count(self.model, t)):
                out = self._operator.matrix @ out
            return out
        return self._operator.evolve(vector, t)

    def evolve_many(self, vector: np.ndarray, times: Sequence[float]) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if not self.stroboscopic:
            return self._operator.evolve_many(vector, times)
        kicks = np.array([kick_count(self.model, t) for t in times])
        if np.any(kicks < 0):
            raise SpinChainError("Stroboscopic evolution runs forward only")
        rows = np.empty((times.size, vector.size), dtype=complex)
        current, done = np.asarray(vector, dtype=complex), 0
        for i in np.argsort(kicks, kind="stable"):
            while done < kicks[i]:
                current = self._operator.matrix @ current
                done += 1
            rows[i] = current
        return rows


def exact_measure_grid(
    chain: ChainSpec,
    model: ModelParams,
    initial: np.ndarray,
    measure: MeasureType,
    parties: Sequence[Parties],
    times: Sequence[float],
    solver: Solver = "lapack",
) -> np.ndarray:
    """Measure grid from full-space evolution, rows over parties and columns over times."""
    rows = ExactDynamics(model, chain, solver).evolve_many(np.asarray(initial, dtype=complex), times)
    grid = np.empty((len(parties), len(rows)))
    for col, psi in enumerate(rows):
        state = PureState(chain, psi)
        for row, p in enumerate(parties):
            grid[row, col] = compute_measure(measure, partial_trace(state, parties_sites(p)), p)
    return grid


def one_magnon_block(matrix: np.ndarray, n_sites: int) -> np.ndarray:
    """Restrict a full-space operator to the one-magnon states, ordered by site."""
    idx = 1 << np.arange(n_sites)
    return matrix[np.ix_(idx, idx)]


@dataclass(frozen=True)
class OracleReport:
    name: str
    max_abs_diff: float
    tolerance: float
    samples: int = 1

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_diff <= self.tolerance)

    @classmethod
    def worst_of(cls, name: str, reports: Sequence["OracleReport"]) -> "OracleReport":
        """One report per check: the largest deviation over all sampled points."""
        if not reports:
            raise SpinChainError(f"{name}: no samples to report")
        worst = max(r.max_abs_diff for r in reports)
        return cls(name, worst, max(r.tolerance for r in reports), sum(r.samples for r in reports))

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.name}: max|diff| = {self.max_abs_diff:.3e} "
            f"over {self.samples} sample{'s' if self.samples != 1 else ''} (tol {self.tolerance:.0e})"
        )


def _as_array(value) -> np.ndarray:
    if isinstance(value, DensityMatrix):
        return value.elements
    if isinstance(value, PureState):
        return value.amplitudes
    return np.asarray(value)


def compare_oracle(analytic, exact, tolerance: float, name: str = "comparison") -> OracleReport:
    a, b = _as_array(analytic), _as_array(exact)
    if a.shape != b.shape:
        raise SpinChainError(f"{name}: shape {a.shape} does not match oracle shape {b.shape}")
    diff = float(np.max(np.abs(a - b), initial=0.0))
    return OracleReport(name, diff, tolerance)
