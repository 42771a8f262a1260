"""Cross-checks of every analytic path against exact diagonalization.

Each check is evaluated at ``samples`` random (parameter, t, t0) points and
reports the largest deviation it saw.
"""
from typing import Callable

import numpy as np

from .exact import (
    ExactDynamics,
    OracleReport,
    build_hamiltonian,
    compare_oracle,
    eigh_hermitian,
)
from .errors import SpinChainError
from .fermions import XYParams, nn_rdm_xy
from .hilbert import ChainSpec, PureState, embed, partial_trace, reduced_density_matrix
from .logger_config import setup_logger
from .magnons import (
    HarperParams,
    HeisenbergParams,
    evolve_one_magnon,
    evolve_sector,
    one_magnon_initial,
    vacuum_two_magnon_initial,
)
from .qdp import QdpSpec, exact_qdp_states, x_qdp_one_magnon, z_qdp_one_magnon

logger = setup_logger(__name__)

DEFAULT_SITES = 8
DEFAULT_TOL = 1e-8
DEFAULT_SAMPLES = 20

# field regimes of the anisotropic chain, plus the Ising limit
XY_PARAMETER_SETS = (
    XYParams(jx=0.7, jy=0.3, h=0.1),
    XYParams(jx=0.7, jy=0.3, h=1.0),
    XYParams(jx=0.7, jy=0.3, h=10.0),
    XYParams(jx=1.0, jy=0.0, h=0.0),
)
XY_MAX_TIME = 5.0

Check = Callable[[ChainSpec, np.random.Generator, float, int], OracleReport]


def _random_pair(rng: np.random.Generator) -> tuple[complex, complex]:
    theta, phi = rng.uniform(0, np.pi / 2), rng.uniform(0, 2 * np.pi)
    return complex(np.cos(theta)), complex(np.exp(1j * phi) * np.sin(theta))


def _exact_state(model, chain: ChainSpec, initial, t: float) -> PureState:
    return PureState(chain, ExactDynamics(model, chain).evolve(embed(initial).amplitudes, t))


def _one_magnon(chain, rng, tol, k) -> OracleReport:
    alpha, beta = _random_pair(rng)
    params = HeisenbergParams(J=1.0, delta=float(rng.uniform(-1, 1)))
    t = float(rng.uniform(0.1, 10.0))
    analytic = embed(evolve_one_magnon(alpha, beta, chain, params, t))
    exact = _exact_state(params, chain, one_magnon_initial(chain, alpha, beta), t)
    return compare_oracle(analytic, exact, tol)


def _harper(chain, rng, tol, k) -> OracleReport:
    alpha, beta = _random_pair(rng)
    params = HarperParams(g=float(rng.uniform(0.1, 1.0)), tau=float(rng.uniform(0.1, 1.0)), eta=1)
    t = int(rng.integers(1, 11)) * params.tau
    initial = one_magnon_initial(chain, alpha, beta)
    analytic = embed(evolve_sector(initial, params, t))
    exact = _exact_state(params, chain, initial, t)
    return compare_oracle(analytic, exact, tol)


def _two_magnon(chain, rng, tol, k) -> OracleReport:
    alpha, beta = _random_pair(rng)
    params = HeisenbergParams(J=1.0, delta=float(rng.choice([-1.0, 0.0, 0.5, 1.0, 2.0])))
    initial = vacuum_two_magnon_initial(chain, alpha, beta)
    t = float(rng.uniform(0.1, 5.0))
    sites = [1, 2, 3]
    analytic = reduced_density_matrix(evolve_sector(initial, params, t), sites)
    exact = partial_trace(_exact_state(params, chain, initial, t), sites)
    return compare_oracle(analytic, exact, tol)


def _xy_bond(chain, rng, tol, k) -> OracleReport:
    if chain.n_sites % 2:
        chain = ChainSpec(n_sites=chain.n_sites + 1)
    alpha, beta = _random_pair(rng)
    params = XY_PARAMETER_SETS[k % len(XY_PARAMETER_SETS)]
    t = float(rng.uniform(0.1, XY_MAX_TIME))
    j = int(rng.integers(1, chain.n_sites))
    analytic = nn_rdm_xy(j, t, alpha, beta, chain, params).to_density_matrix((j, j + 1))
    exact = partial_trace(_exact_state(params, chain, one_magnon_initial(chain, alpha, beta), t), [j, j + 1])
    return compare_oracle(analytic, exact, tol)


def _qdp(axis, analytic_fn) -> Check:
    def check(chain, rng, tol, k) -> OracleReport:
        alpha, beta = _random_pair(rng)
        params = HeisenbergParams(J=1.0, delta=float(rng.uniform(-1, 1)))
        t0 = float(rng.uniform(0.1, 2.0))
        t = t0 + float(rng.uniform(0.0, 2.0))
        site = int(rng.integers(1, 4))
        spec = QdpSpec(site=site, t0=t0, axis=axis)
        sites = [1, 2, 3]
        analytic = reduced_density_matrix(analytic_fn(alpha, beta, site, t0, t, chain, params), sites)
        initial = one_magnon_initial(chain, alpha, beta)
        (exact,) = exact_qdp_states(initial, params, spec, np.array([t]))
        return compare_oracle(analytic, reduced_density_matrix(exact, sites), tol)

    return check


def _jacobi(chain, rng, tol, k) -> OracleReport:
    params = HeisenbergParams(J=1.0, delta=float(rng.uniform(-1, 1)))
    matrix = build_hamiltonian(params, chain, sector=1).matrix
    lapack = eigh_hermitian(matrix, "lapack").eigenvalues
    jacobi = eigh_hermitian(matrix, "jacobi").eigenvalues
    return compare_oracle(np.sort(jacobi), np.sort(lapack), tol)


CHECKS: tuple[tuple[str, Check], ...] = (
    ("heisenberg one-magnon amplitudes", _one_magnon),
    ("harper stroboscopic amplitudes", _harper),
    ("vacuum+two-magnon RDM(1,2,3)", _two_magnon),
    ("xy nearest-neighbour RDM", _xy_bond),
    ("z-measurement branches RDM(1,2,3)", _qdp((0.0, 0.0, 1.0), z_qdp_one_magnon)),
    ("x-measurement branches RDM(1,2,3)", _qdp((1.0, 0.0, 0.0), x_qdp_one_magnon)),
    ("jacobi vs lapack one-magnon spectrum", _jacobi),
)


def validation_suite(
    n: int = DEFAULT_SITES,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
) -> list[OracleReport]:
    """Run every oracle comparison on an n-site ring with random inputs drawn from ``seed``."""
    if samples < 1:
        raise SpinChainError(f"samples must be positive, got {samples}")
    chain = ChainSpec(n_sites=n)
    rng = np.random.default_rng(seed)
    reports = []
    for name, check in CHECKS:
        report = OracleReport.worst_of(name, [check(chain, rng, tol, k) for k in range(samples)])
        logger.info(str(report))
        reports.append(report)
    return reports
