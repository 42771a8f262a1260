"""Entropies and correlation measures on few-qubit density matrices.

All logarithms are base 2, so informations are in bits.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize

from .errors import NormalizationError, SpinChainError
from .hilbert import (
    IDENTITY2,
    PSD_TOL,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SIGMA_MINUS,
    DensityMatrix,
    partial_trace,
)

ZERO_EIGENVALUE = 1e-14
CLAMP_TOL = 1e-12
XSTATE_TOL = 1e-10
SIGN_TOL = 1e-10

Party = tuple[int, ...]


def shannon_entropy(probabilities) -> float:
    p = np.asarray(probabilities, dtype=float)
    p = p[p > ZERO_EIGENVALUE]
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def vn_entropy(rho: DensityMatrix | np.ndarray) -> float:
    elements = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho)
    eigenvalues = np.linalg.eigvalsh(elements)
    if eigenvalues[0] < -PSD_TOL:
        raise SpinChainError(f"Not positive semidefinite: eigenvalue {eigenvalues[0]:.3e}")
    return shannon_entropy(eigenvalues)


def _clamp(value: float) -> float:
    return 0.0 if abs(value) < CLAMP_TOL else value


@dataclass(frozen=True)
class XStateRDM:
    """Two-qubit X state in the basis |00>, |01>, |10>, |11> (1 = down).

    ``u, w1, w2, v`` are the diagonal, ``x = rho[01, 10]`` and ``z = rho[00, 11]``.
    """

    u: float
    v: float
    w1: float
    w2: float
    x: complex = 0j
    z: complex = 0j

    def __post_init__(self):
        populations = (self.u, self.v, self.w1, self.w2)
        if abs(sum(populations) - 1.0) > 1e-10:
            raise NormalizationError(f"X-state populations sum to {sum(populations):.15g}")
        if min(populations) < -1e-12:
            raise SpinChainError(f"Negative X-state population in {populations}")
        if abs(self.x) ** 2 > self.w1 * self.w2 + 1e-10:
            raise SpinChainError("|x|^2 exceeds w1*w2: inner block not positive")
        if abs(self.z) ** 2 > self.u * self.v + 1e-10:
            raise SpinChainError("|z|^2 exceeds u*v: outer block not positive")

    def to_density_matrix(self, sites: tuple[int, int] = (1, 2)) -> DensityMatrix:
        rho = np.diag([self.u, self.w1, self.w2, self.v]).astype(complex)
        rho[0, 3], rho[3, 0] = self.z, np.conj(self.z)
        rho[1, 2], rho[2, 1] = self.x, np.conj(self.x)
        return DensityMatrix(rho, sites)


def is_xstate(rho: DensityMatrix, tol: float = XSTATE_TOL) -> bool:
    if rho.dim != 4:
        return False
    mask = np.ones((4, 4), dtype=bool)
    mask[np.arange(4), np.arange(4)] = False
    mask[np.arange(4), 3 - np.arange(4)] = False
    return bool(np.max(np.abs(rho.elements[mask])) <= tol)


def xstate_from_density_matrix(rho: DensityMatrix) -> XStateRDM:
    if not is_xstate(rho):
        raise SpinChainError("Density matrix is not of X form")
    e = rho.elements
    diag = np.clip(np.diag(e).real, 0.0, None)
    diag = diag / diag.sum()
    return XStateRDM(
        u=float(diag[0]), w1=float(diag[1]), w2=float(diag[2]), v=float(diag[3]),
        x=complex(e[1, 2]), z=complex(e[0, 3]),
    )


def xstate_spectrum(rdm: XStateRDM) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of rho and of its partial transpose.

    The two lists differ only by swapping the roles of |x| and |z|.
    """
    def pair(a, b, c):
        root = np.sqrt((a - b) ** 2 + 4 * abs(c) ** 2)
        return [0.5 * (a + b + root), 0.5 * (a + b - root)]

    lam = np.array(pair(rdm.u, rdm.v, rdm.z) + pair(rdm.w1, rdm.w2, rdm.x))
    lam_pt = np.array(pair(rdm.u, rdm.v, rdm.x) + pair(rdm.w1, rdm.w2, rdm.z))
    return lam, lam_pt


def _require_two_qubits(rho: DensityMatrix) -> None:
    if rho.dim != 4:
        raise SpinChainError(f"Two-qubit measure needs a 4x4 matrix, got {rho.dim}x{rho.dim}")


def concurrence(rdm: XStateRDM | DensityMatrix) -> float:
    if isinstance(rdm, XStateRDM):
        value = 2.0 * max(
            0.0,
            abs(rdm.x) - np.sqrt(max(rdm.u * rdm.v, 0.0)),
            abs(rdm.z) - np.sqrt(max(rdm.w1 * rdm.w2, 0.0)),
        )
        return _clamp(float(value))
    _require_two_qubits(rdm)
    # Wootters: spin-flipped state with sigma_y (x) sigma_y
    flip = np.kron(SIGMA_Y, SIGMA_Y)
    rho = rdm.elements
    rho_tilde = flip @ rho.conj() @ flip
    eigenvalues = np.linalg.eigvals(rho @ rho_tilde).real
    roots = np.sort(np.sqrt(np.clip(eigenvalues, 0.0, None)))[::-1]
    return _clamp(float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3])))


def _default_split(rho: DensityMatrix) -> tuple[Party, Party]:
    if rho.n_qubits != 2:
        raise SpinChainError(f"Give an explicit split for a {rho.n_qubits}-qubit matrix")
    return (rho.sites[0],), (rho.sites[1],)


def _check_groups(rho: DensityMatrix, *groups: Sequence[int]) -> list[Party]:
    flat = [s for g in groups for s in g]
    if any(len(g) == 0 for g in groups) or len(set(flat)) != len(flat):
        raise SpinChainError(f"Parties must be non-empty and disjoint: {groups}")
    missing = [s for s in flat if s not in rho.sites]
    if missing:
        raise SpinChainError(f"Sites {missing} not present in matrix over {rho.sites}")
    return [tuple(g) for g in groups]


def _entropy_of(rho: DensityMatrix, group: Sequence[int]) -> float:
    if len(group) == rho.n_qubits and set(group) == set(rho.sites):
        return vn_entropy(rho)
    return vn_entropy(partial_trace(rho, group))


def mutual_information(
    rho: DensityMatrix, a: Optional[Sequence[int]] = None, b: Optional[Sequence[int]] = None
) -> float:
    if a is None or b is None:
        a, b = _default_split(rho)
    a, b = _check_groups(rho, a, b)
    return _entropy_of(rho, a) + _entropy_of(rho, b) - _entropy_of(rho, a + b)


def _block_entropy(p: float, q: float) -> float:
    """Entropy of diag(p, q) weighted by p + q, i.e. -p log p/(p+q) - q log q/(p+q)."""
    total = p + q
    if total <= ZERO_EIGENVALUE:
        return 0.0
    return total * shannon_entropy([p / total, q / total])


def discord(rdm: XStateRDM, measured_party: Literal["A", "B"] = "A") -> float:
    """Closed-form discord of an X state, minimizing over the z and x measurement axes."""
    u, v, w1, w2 = rdm.u, rdm.v, rdm.w1, rdm.w2
    if measured_party == "A":
        c_z = _block_entropy(u, w1) + _block_entropy(w2, v)
        imbalance = u + w2 - w1 - v
        s_measured = shannon_entropy([u + w1, w2 + v])
    elif measured_party == "B":
        c_z = _block_entropy(u, w2) + _block_entropy(w1, v)
        imbalance = u + w1 - w2 - v
        s_measured = shannon_entropy([u + w2, w1 + v])
    else:
        raise SpinChainError(f"measured_party must be 'A' or 'B', got {measured_party!r}")
    root = np.sqrt(imbalance ** 2 + 4 * (abs(rdm.x) + abs(rdm.z)) ** 2)
    c_x = binary_entropy(0.5 * (1 + min(root, 1.0)))
    joint = shannon_entropy(xstate_spectrum(rdm)[0])
    return max(0.0, _clamp(min(c_z, c_x) + s_measured - joint))


def _projector(theta: float, phi: float) -> np.ndarray:
    n_sigma = (
        np.sin(theta) * np.cos(phi) * SIGMA_X
        + np.sin(theta) * np.sin(phi) * SIGMA_Y
        + np.cos(theta) * SIGMA_Z
    )
    return 0.5 * (IDENTITY2 + n_sigma)


def conditional_entropy(
    rho: DensityMatrix, theta: float, phi: float, measured: Literal["A", "B"] = "A"
) -> float:
    """Average entropy left on one qubit after measuring the other along (theta, phi)."""
    _require_two_qubits(rho)
    r = rho.elements.reshape(2, 2, 2, 2)
    plus = _projector(theta, phi)
    total = 0.0
    for proj in (plus, IDENTITY2 - plus):
        if measured == "A":
            conditional = np.einsum("ca,abcd->bd", proj, r)
        else:
            conditional = np.einsum("db,abcd->ac", proj, r)
        p = np.trace(conditional).real
        if p > ZERO_EIGENVALUE:
            total += p * vn_entropy(conditional / p)
    return total


def discord_numeric(
    rho: DensityMatrix,
    measured: Literal["A", "B"] = "A",
    n_theta: int = 91,
    n_phi: int = 91,
    refine: bool = True,
) -> float:
    """Discord of an arbitrary two-qubit state by grid search over measurement axes."""
    _require_two_qubits(rho)
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    best, best_point = np.inf, (0.0, 0.0)
    for theta in thetas:
        for phi in (phis if 0 < theta < np.pi else phis[:1]):
            value = conditional_entropy(rho, theta, phi, measured)
            if value < best:
                best, best_point = value, (theta, phi)
    if refine:
        result = minimize(
            lambda angles: conditional_entropy(rho, angles[0], angles[1], measured),
            np.array(best_point),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-12},
        )
        best = min(best, float(result.fun))
    measured_site = rho.sites[0] if measured == "A" else rho.sites[1]
    s_measured = vn_entropy(partial_trace(rho, [measured_site]))
    return max(0.0, _clamp(best + s_measured - vn_entropy(rho)))


def partial_transpose(rho: DensityMatrix, party: Sequence[int]) -> np.ndarray:
    (party,) = _check_groups(rho, party)
    k = rho.n_qubits
    perm = list(range(2 * k))
    for site in party:
        axis = rho.sites.index(site)
        perm[axis], perm[k + axis] = perm[k + axis], perm[axis]
    return rho.elements.reshape((2,) * (2 * k)).transpose(perm).reshape(rho.dim, rho.dim)


def negativity(rdm: XStateRDM | DensityMatrix, party: Optional[Sequence[int]] = None) -> float:
    if isinstance(rdm, XStateRDM):
        eigenvalues = xstate_spectrum(rdm)[1]
    else:
        if party is None:
            party = (rdm.sites[0],)
        eigenvalues = np.linalg.eigvalsh(partial_transpose(rdm, party))
    return _clamp(float(0.5 * (np.sum(np.abs(eigenvalues)) - 1.0)))


def tmi(rho: DensityMatrix, parties: Optional[Sequence[Sequence[int]]] = None) -> float:
    """I3(A:B:C) = I(A:B) + I(A:C) - I(A:BC), via the seven-entropy expansion."""
    if parties is None:
        if rho.n_qubits != 3:
            raise SpinChainError("Give explicit parties for tripartite information")
        parties = [(s,) for s in rho.sites]
    if len(parties) != 3:
        raise SpinChainError(f"Tripartite information needs three parties, got {len(parties)}")
    groups = _check_groups(rho, *parties)
    value = 0.0
    for size in (1, 2, 3):
        sign = 1.0 if size % 2 else -1.0
        for combo in combinations(groups, size):
            value += sign * _entropy_of(rho, tuple(s for g in combo for s in g))
    return _clamp(value)


def _product_ket(bits: str) -> np.ndarray:
    ket = np.zeros(2 ** len(bits), dtype=complex)
    ket[int(bits, 2)] = 1.0
    return ket


def ghz_state(n_qubits: int) -> DensityMatrix:
    psi = (_product_ket("0" * n_qubits) + _product_ket("1" * n_qubits)) / np.sqrt(2)
    return DensityMatrix(np.outer(psi, psi.conj()), tuple(range(1, n_qubits + 1)))


def w_state(n_qubits: int) -> DensityMatrix:
    psi = sum(
        _product_ket("".join("1" if i == k else "0" for i in range(n_qubits)))
        for k in range(n_qubits)
    ) / np.sqrt(n_qubits)
    return DensityMatrix(np.outer(psi, psi.conj()), tuple(range(1, n_qubits + 1)))


def build_pq_mixture(p: float, q: float) -> DensityMatrix:
    if p < 0 or q < 0 or p + q > 1 + 1e-12:
        raise SpinChainError(f"Need p, q >= 0 and p + q <= 1, got p={p}, q={q}")
    w3 = w_state(3).elements
    rho = p * w3
    rho[7, 7] += q
    rho[0, 0] += 1.0 - p - q
    return DensityMatrix(rho, (1, 2, 3))


def tmi_map(p_steps: int = 50, q_steps: int = 50) -> list[tuple[float, float, float]]:
    """TMI of the p,q mixture on a uniform grid, restricted to p + q <= 1."""
    cells = []
    for p in np.linspace(0.0, 1.0, p_steps):
        for q in np.linspace(0.0, 1.0, q_steps):
            if p + q <= 1.0 + 1e-12:
                cells.append((float(p), float(q), tmi(build_pq_mixture(p, min(q, 1.0 - p)))))
    return cells


def tmi_sign(value: float, tol: float = SIGN_TOL) -> int:
    """-1, 0 or +1; values within ``tol`` of zero count as zero."""
    if abs(value) <= tol:
        return 0
    return 1 if value > 0 else -1


class MeasureReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    concurrence: float = Field(..., ge=0.0, le=1.0 + 1e-10)
    mutual_information: float = Field(..., ge=-1e-10)
    discord: float = Field(..., ge=0.0)
    negativity: float = Field(..., ge=0.0, le=0.5 + 1e-10)
    tmi: Optional[float] = None


def measure_report(rho: DensityMatrix, rho_abc: Optional[DensityMatrix] = None) -> MeasureReport:
    """All pairwise measures of a two-qubit state, plus TMI when a triple is given."""
    _require_two_qubits(rho)
    if is_xstate(rho):
        x_state = xstate_from_density_matrix(rho)
        pair_discord = discord(x_state)
    else:
        x_state = None
        pair_discord = discord_numeric(rho)
    return MeasureReport(
        concurrence=concurrence(x_state if x_state is not None else rho),
        mutual_information=mutual_information(rho),
        discord=pair_discord,
        negativity=negativity(x_state if x_state is not None else rho),
        tmi=tmi(rho_abc) if rho_abc is not None else None,
    )


def sigma_pair_expectations(rho: DensityMatrix) -> dict[str, float]:
    """Re<s+ s->, Re<s+ s+> and <sz sz> of a two-qubit state."""
    _require_two_qubits(rho)
    e = rho.elements
    plus = SIGMA_MINUS.T
    return {
        "sigma_plus_minus": float(np.trace(e @ np.kron(plus, SIGMA_MINUS)).real),
        "sigma_plus_plus": float(np.trace(e @ np.kron(plus, plus)).real),
        "sigma_z_z": float(np.trace(e @ np.kron(SIGMA_Z, SIGMA_Z)).real),
    }
