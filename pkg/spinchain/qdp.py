"""Quantum dynamical processes: a projective measurement or a unitary kick at one site and epoch t0.

The state evolves under the background model up to t0, the process acts on
site m, and the result evolves on to t.  Magnon-conserving backgrounds with
a one-magnon initial state have amplitude shortcuts; everything else goes
through exact diagonalization.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import singledispatch
from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import NormalizationError, SpinChainError
from .exact import ExactDynamics, ModelParams
from .hilbert import (
    IDENTITY2,
    RENORM_SLOP,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    BranchMixture,
    ChainSpec,
    DensityMatrix,
    PureState,
    Sector,
    SectorAmplitudes,
    apply_site_operator,
    embed,
    pair_lookup,
    reduced_density_matrix,
)
from .logger_config import setup_logger
from .magnons import (
    HarperParams,
    HeisenbergParams,
    MagnonModel,
    evolve_sector,
    kick_count,
    one_magnon_initial,
)
from .operations import MeasureType, Parties, compute_measure, format_parties, parties_sites

logger = setup_logger(__name__)

KRAUS_TOL = 1e-12
UNIT_TOL = 1e-12

Engine = Literal["auto", "analytic", "exact"]
QdpState = Union[BranchMixture, PureState]


class QdpKind(str, Enum):
    projective = "projective"
    unitary_kick = "unitary_kick"


class QdpSpec(BaseModel):
    """Where, when and what: site m, epoch t0 and either a measurement axis or kick (gamma, delta)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    site: int = Field(2, ge=1)
    t0: float = Field(0.0, ge=0)
    kind: QdpKind = QdpKind.projective
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    gamma: tuple[float, float] = (1.0, 0.0)
    delta: tuple[float, float] = (0.0, 0.0)
    kick_from_epoch: bool = False

    @model_validator(mode="after")
    def check_process(self):
        norm = float(np.linalg.norm(self.axis))
        if abs(norm - 1.0) > RENORM_SLOP:
            raise ValueError(f"Measurement axis must be a unit vector, |n| = {norm:.12g}")
        if norm != 1.0:
            object.__setattr__(self, "axis", tuple(float(c) / norm for c in self.axis))
        if self.kind == QdpKind.unitary_kick and not self.kick_from_epoch:
            total = abs(self.gamma_value) ** 2 + abs(self.delta_value) ** 2
            if abs(total - 1.0) > UNIT_TOL:
                raise ValueError(f"|gamma|^2 + |delta|^2 = {total:.15g}, expected 1")
        return self

    @property
    def gamma_value(self) -> complex:
        return complex(*self.gamma)

    @property
    def delta_value(self) -> complex:
        return complex(*self.delta)

    def kick(self) -> tuple[complex, complex]:
        if self.kick_from_epoch:
            return kick_from_epoch(self.t0, self.axis)
        return self.gamma_value, self.delta_value

    def at_epoch(self, t0: float) -> "QdpSpec":
        return self.model_copy(update={"t0": float(t0)})


@dataclass
class InterventionResult:
    """Post-process state at one time, or (t0, t) surfaces with rows over epochs."""

    spec: QdpSpec
    times: np.ndarray
    epochs: np.ndarray
    state: Optional[QdpState] = None
    surfaces: dict[str, np.ndarray] = field(default_factory=dict)

    def rdm(self, sites: Sequence[int]) -> DensityMatrix:
        if self.state is None:
            raise SpinChainError("Surface results carry no state")
        return reduced_density_matrix(self.state, sites)


def kraus_projective(axis) -> tuple[np.ndarray, np.ndarray]:
    """P0 = (1 + s.n)/2 and P1 = (1 - s.n)/2."""
    n = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > RENORM_SLOP:
        raise NormalizationError(f"Axis {tuple(n)} is not a unit vector")
    n = n / np.linalg.norm(n)
    n_sigma = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    p0, p1 = 0.5 * (IDENTITY2 + n_sigma), 0.5 * (IDENTITY2 - n_sigma)
    completeness = p0.conj().T @ p0 + p1.conj().T @ p1 - IDENTITY2
    if np.max(np.abs(completeness)) > KRAUS_TOL:
        raise SpinChainError("Kraus operators are not complete")
    return p0, p1


def kick_from_epoch(t0: float, axis) -> tuple[complex, complex]:
    """gamma = cos t0, delta = (n_y + i n_x) sin t0."""
    n = np.asarray(axis, dtype=float)
    return complex(np.cos(t0)), complex((n[1] + 1j * n[0]) * np.sin(t0))


def kick_matrix(gamma: complex, delta: complex) -> np.ndarray:
    """V|0> = gamma|0> + delta|1>, V|1> = -delta*|0> + gamma*|1>."""
    total = abs(gamma) ** 2 + abs(delta) ** 2
    if abs(total - 1.0) > UNIT_TOL:
        raise NormalizationError(f"|gamma|^2 + |delta|^2 = {total:.15g}, expected 1")
    return np.array([[gamma, -np.conj(delta)], [delta, np.conj(gamma)]], dtype=complex)


def _is_z_axis(axis) -> bool:
    return bool(np.allclose(np.abs(axis), (0.0, 0.0, 1.0), atol=1e-12))


def _is_x_axis(axis) -> bool:
    return bool(np.allclose(np.abs(axis), (1.0, 0.0, 0.0), atol=1e-12))


def _z_split(amps: SectorAmplitudes, site: int) -> tuple[np.ndarray, np.ndarray]:
    """Components with site up and with site down, inside the sector."""
    down = np.zeros(amps.amplitudes.size, dtype=bool)
    if amps.sector == Sector.one_magnon:
        down[site - 1] = True
    else:
        table = pair_lookup(amps.chain.n_sites)[site - 1]
        down[1 + table[table >= 0]] = True
    return np.where(down, 0, amps.amplitudes), np.where(down, amps.amplitudes, 0)


@singledispatch
def apply_projective(state, site: int, axis):
    raise SpinChainError(f"Cannot measure a {type(state).__name__}")


@apply_projective.register
def _(state: DensityMatrix, site: int, axis) -> DensityMatrix:
    p0, p1 = kraus_projective(axis)
    return DensityMatrix(apply_site_operator(state, site, p0) + apply_site_operator(state, site, p1), state.sites)


@apply_projective.register
def _(state: PureState, site: int, axis) -> BranchMixture:
    p0, p1 = kraus_projective(axis)
    return BranchMixture.from_unnormalized(
        state.chain, [(apply_site_operator(state, site, p), None) for p in (p0, p1)]
    )


@apply_projective.register
def _(state: SectorAmplitudes, site: int, axis) -> BranchMixture:
    state.chain.check_site(site)
    if _is_z_axis(axis):
        return BranchMixture.from_unnormalized(
            state.chain, [(part, state.sector) for part in _z_split(state, site)]
        )
    return apply_projective(embed(state), site, axis)


@apply_projective.register
def _(state: BranchMixture, site: int, axis) -> BranchMixture:
    branches = []
    for weight, branch in state.branches:
        for sub_weight, sub in apply_projective(branch, site, axis).branches:
            branches.append((weight * sub_weight, sub))
    return BranchMixture(state.chain, tuple(branches))


@singledispatch
def apply_unitary_kick(state, site: int, gamma: complex, delta: complex):
    raise SpinChainError(f"Cannot kick a {type(state).__name__}")


@apply_unitary_kick.register
def _(state: DensityMatrix, site: int, gamma: complex, delta: complex) -> DensityMatrix:
    return DensityMatrix(apply_site_operator(state, site, kick_matrix(gamma, delta)), state.sites)


@apply_unitary_kick.register
def _(state: PureState, site: int, gamma: complex, delta: complex) -> PureState:
    return PureState(state.chain, apply_site_operator(state, site, kick_matrix(gamma, delta)))


@apply_unitary_kick.register
def _(state: SectorAmplitudes, site: int, gamma: complex, delta: complex) -> PureState:
    return apply_unitary_kick(embed(state), site, gamma, delta)


@apply_unitary_kick.register
def _(state: BranchMixture, site: int, gamma: complex, delta: complex) -> BranchMixture:
    return BranchMixture(
        state.chain,
        tuple((w, apply_unitary_kick(b, site, gamma, delta)) for w, b in state.branches),
    )


def elapsed(model: ModelParams, t0: float, t: float) -> float:
    """Evolution time between t0 and t; stroboscopic models count whole kicks."""
    if isinstance(model, HarperParams):
        return (kick_count(model, t) - kick_count(model, t0)) * model.tau
    return t - t0


def _check_order(t0: float, t: float) -> None:
    if t < t0:
        raise SpinChainError(f"Time t={t} precedes the process epoch t0={t0}")


def _z_branches(initial: SectorAmplitudes, model: MagnonModel, site: int, t0: float, t: float) -> BranchMixture:
    _check_order(t0, t)
    at_epoch = evolve_sector(initial, model, t0)
    dt = elapsed(model, t0, t)
    branches = []
    for part in _z_split(at_epoch, site):
        weight = float(np.vdot(part, part).real)
        if weight <= 1e-15:
            continue
        unit = SectorAmplitudes(initial.chain, initial.sector, part / np.sqrt(weight))
        branches.append((weight, evolve_sector(unit, model, dt)))
    return BranchMixture(initial.chain, tuple(branches))


def z_qdp_one_magnon(
    alpha: complex, beta: complex, site: int, t0: float, t: float, chain: ChainSpec, params: MagnonModel
) -> BranchMixture:
    """Branches H (site m found up) and K (site m found down) after a z measurement.

    K^x = G^x_m(t - t0) Omega^m(t0) and H = Omega(t) - K; weights are their squared norms.
    """
    chain.check_site(site)
    return _z_branches(one_magnon_initial(chain, alpha, beta), model=params, site=site, t0=t0, t=t)


def _x_branches(initial: SectorAmplitudes, params: HeisenbergParams, site: int, t0: float, t: float) -> BranchMixture:
    _check_order(t0, t)
    chain = initial.chain
    omega = evolve_sector(initial, params, t0).amplitudes
    dt = t - t0
    # sigma^x_m moves the magnon at m to the vacuum and adds m to every other one
    flipped = np.zeros(1 + chain.n_sites * (chain.n_sites - 1) // 2, dtype=complex)
    flipped[0] = omega[site - 1]
    lookup = pair_lookup(chain.n_sites)[site - 1]
    others = np.arange(chain.n_sites) != site - 1
    flipped[1 + lookup[others]] = omega[others]
    stay = evolve_sector(SectorAmplitudes(chain, Sector.one_magnon, omega), params, dt)
    moved = evolve_sector(SectorAmplitudes(chain, Sector.vacuum_plus_two_magnon, flipped), params, dt)
    return BranchMixture(chain, ((0.5, stay), (0.5, moved)))


def x_qdp_one_magnon(
    alpha: complex, beta: complex, site: int, t0: float, t: float, chain: ChainSpec, params: HeisenbergParams
) -> BranchMixture:
    """Equal mixture of the evolved one-magnon branch and the vacuum-plus-two-magnon branch.

    The pair amplitudes are L^{x1,x2} = sum_{x != m} G^{x1,x2}_{m,x}(t - t0) Omega^x(t0).
    """
    chain.check_site(site)
    return _x_branches(one_magnon_initial(chain, alpha, beta), params, site, t0, t)


def _analytic_path(initial, model: ModelParams, spec: QdpSpec):
    if not isinstance(initial, SectorAmplitudes) or initial.sector != Sector.one_magnon:
        return None
    if spec.kind != QdpKind.projective:
        return None
    if isinstance(model, (HeisenbergParams, HarperParams)) and _is_z_axis(spec.axis):
        return lambda t0, t: _z_branches(initial, model, spec.site, t0, t)
    if isinstance(model, HeisenbergParams) and _is_x_axis(spec.axis):
        return lambda t0, t: _x_branches(initial, model, spec.site, t0, t)
    return None


def _full_vector(initial) -> np.ndarray:
    if isinstance(initial, SectorAmplitudes):
        return embed(initial).amplitudes
    if isinstance(initial, PureState):
        return initial.amplitudes
    raise SpinChainError(f"Unsupported initial state {type(initial).__name__}")


def _apply_process(psi: PureState, spec: QdpSpec) -> QdpState:
    if spec.kind == QdpKind.projective:
        return apply_projective(psi, spec.site, spec.axis)
    return apply_unitary_kick(psi, spec.site, *spec.kick())


def exact_qdp_states(initial, model: ModelParams, spec: QdpSpec, times: np.ndarray) -> list[QdpState]:
    """Post-process states at every t >= t0 from one exact pipeline."""
    chain = initial.chain
    dynamics = ExactDynamics(model, chain)
    psi_epoch = PureState(chain, dynamics.evolve(_full_vector(initial), spec.t0))
    processed = _apply_process(psi_epoch, spec)
    branches = processed.branches if isinstance(processed, BranchMixture) else ((1.0, processed),)
    steps = np.array([elapsed(model, spec.t0, t) for t in times])
    evolved = [(w, dynamics.evolve_many(b.amplitudes, steps)) for w, b in branches]
    states: list[QdpState] = []
    for i in range(times.size):
        parts = tuple((w, PureState(chain, rows[i])) for w, rows in evolved)
        states.append(parts[0][1] if len(parts) == 1 and parts[0][0] == 1.0 else BranchMixture(chain, parts))
    return states


def _background_state(initial, model: ModelParams, t: float, exact: bool):
    if not exact:
        return evolve_sector(initial, model, t)
    dynamics = ExactDynamics(model, initial.chain)
    return PureState(initial.chain, dynamics.evolve(_full_vector(initial), t))


def _choose(initial, model: ModelParams, spec: QdpSpec, engine: Engine):
    path = _analytic_path(initial, model, spec) if engine != "exact" else None
    if engine == "analytic" and path is None:
        raise SpinChainError("No analytic path for this initial state, model and process")
    return path


def qdp_evolution_generic(
    initial, model: ModelParams, spec: QdpSpec, t: float, engine: Engine = "auto"
) -> InterventionResult:
    """State at time t after the process; before t0 it is the background evolution."""
    path = _choose(initial, model, spec, engine)
    if t < spec.t0:
        state = _background_state(initial, model, t, exact=path is None)
    elif path is not None:
        state = path(spec.t0, t)
    else:
        state = exact_qdp_states(initial, model, spec, np.array([t]))[0]
    return InterventionResult(spec, np.array([t]), np.array([spec.t0]), state=state)


def surface_key(measure: MeasureType, parties: Parties) -> str:
    measure = MeasureType(measure)
    prefix = measure.value if measure == MeasureType.tmi else f"delta_{measure.value}"
    return f"{prefix}({format_parties(parties)})"


def delta_surfaces(
    initial,
    model: ModelParams,
    spec: QdpSpec,
    times: Sequence[float],
    epochs: Sequence[float],
    targets: Sequence[tuple[MeasureType, Parties]],
    threads: int = 1,
    engine: Engine = "auto",
) -> InterventionResult:
    """Change of each measure caused by the process, rows over t0 and columns over t.

    Tripartite targets give the post-process value itself.  Cells with t < t0
    are 0 for the change surfaces and the background value for tripartite ones.
    """
    times = np.asarray(times, dtype=float)
    epochs = np.asarray(epochs, dtype=float)
    targets = [(MeasureType(m), tuple(tuple(g) for g in p)) for m, p in targets]
    path = _choose(initial, model, spec, engine)
    exact = path is None

    def values(state) -> np.ndarray:
        return np.array([
            compute_measure(m, reduced_density_matrix(state, parties_sites(p)), p) for m, p in targets
        ])

    background = np.array([values(_background_state(initial, model, t, exact)) for t in times])
    logger.info(
        f"QDP surfaces: {len(epochs)} epochs x {len(times)} times, "
        f"{len(targets)} targets, engine={'exact' if exact else 'analytic'}"
    )

    def row(t0: float) -> np.ndarray:
        cells = np.zeros((len(times), len(targets)))
        after = times >= t0
        if exact:
            states = exact_qdp_states(initial, model, spec.at_epoch(t0), times[after]) if after.any() else []
        else:
            states = [path(t0, t) for t in times[after]]
        cells[after] = [values(s) for s in states] if states else np.zeros((0, len(targets)))
        return cells

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(row, list(epochs)))

    cube = np.array(rows).reshape(len(epochs), len(times), len(targets))
    surfaces = {}
    for k, (measure, parties) in enumerate(targets):
        after = times[None, :] >= epochs[:, None]
        if measure == MeasureType.tmi:
            surface = np.where(after, cube[:, :, k], background[None, :, k])
        else:
            surface = np.where(after, cube[:, :, k] - background[None, :, k], 0.0)
        surfaces[surface_key(measure, parties)] = surface
    return InterventionResult(spec, times, epochs, surfaces=surfaces)
