from enum import Enum
from typing import Callable, Sequence

from .errors import SpinChainError
from .hilbert import DensityMatrix, partial_trace
from . import measures

Parties = tuple[tuple[int, ...], ...]


class MeasureType(str, Enum):
    concurrence = "concurrence"
    mutual_information = "mutual_information"
    discord = "discord"
    negativity = "negativity"
    tmi = "tmi"


def parse_parties(text: str) -> Parties:
    """'1:2' -> ((1,), (2,)); '2:1,3' -> ((2,), (1, 3)); '1:2:3' -> three parties."""
    try:
        groups = tuple(
            tuple(int(s) for s in group.split(",")) for group in text.strip().split(":")
        )
    except ValueError:
        raise SpinChainError(f"Cannot parse parties {text!r}") from None
    flat = [s for g in groups for s in g]
    if len(groups) < 2 or len(set(flat)) != len(flat) or min(flat) < 1:
        raise SpinChainError(f"Parties must be two or three disjoint site groups: {text!r}")
    return groups


def format_parties(parties: Parties) -> str:
    return ":".join(",".join(str(s) for s in group) for group in parties)


def parties_sites(parties: Parties) -> list[int]:
    return [s for group in parties for s in group]


def _restricted(rho: DensityMatrix, parties: Parties) -> DensityMatrix:
    sites = parties_sites(parties)
    if list(rho.sites) == sites:
        return rho
    return partial_trace(rho, sites)


def _pair(parties: Parties, name: str) -> None:
    if len(parties) != 2 or any(len(g) != 1 for g in parties):
        raise SpinChainError(f"{name} is defined for two single sites, got {format_parties(parties)}")


def _concurrence(rho: DensityMatrix, parties: Parties) -> float:
    _pair(parties, "Concurrence")
    pair = _restricted(rho, parties)
    if measures.is_xstate(pair):
        return measures.concurrence(measures.xstate_from_density_matrix(pair))
    return measures.concurrence(pair)


def _mutual_information(rho: DensityMatrix, parties: Parties) -> float:
    if len(parties) != 2:
        raise SpinChainError("Mutual information needs exactly two parties")
    return measures.mutual_information(_restricted(rho, parties), parties[0], parties[1])


def _discord(rho: DensityMatrix, parties: Parties) -> float:
    _pair(parties, "Discord")
    pair = _restricted(rho, parties)
    if measures.is_xstate(pair):
        return measures.discord(measures.xstate_from_density_matrix(pair))
    return measures.discord_numeric(pair)


def _negativity(rho: DensityMatrix, parties: Parties) -> float:
    if len(parties) != 2:
        raise SpinChainError("Negativity needs exactly two parties")
    return measures.negativity(_restricted(rho, parties), parties[0])


def _tmi(rho: DensityMatrix, parties: Parties) -> float:
    if len(parties) != 3:
        raise SpinChainError("Tripartite information needs exactly three parties")
    return measures.tmi(_restricted(rho, parties), parties)


_MEASURE_MAP: dict[MeasureType, Callable[[DensityMatrix, Parties], float]] = {
    MeasureType.concurrence: _concurrence,
    MeasureType.mutual_information: _mutual_information,
    MeasureType.discord: _discord,
    MeasureType.negativity: _negativity,
    MeasureType.tmi: _tmi,
}


def measure_accepts(measure: MeasureType, parties: Parties) -> bool:
    """Whether the measure is defined for this party layout."""
    measure = MeasureType(measure)
    if measure in (MeasureType.concurrence, MeasureType.discord):
        return len(parties) == 2 and all(len(g) == 1 for g in parties)
    if measure == MeasureType.tmi:
        return len(parties) == 3
    return len(parties) == 2


def compute_measure(measure: MeasureType, rho: DensityMatrix, parties: Sequence[Sequence[int]]) -> float:
    """Evaluate one measure on the parties of a reduced density matrix.

    Raises SpinChainError (a ValueError) for parties the measure does not
    accept, or KeyError for unknown measures.
    """
    func = _MEASURE_MAP.get(measure)
    if func is None:
        raise KeyError(f"Unsupported measure: {measure}")
    return func(rho, tuple(tuple(g) for g in parties))
