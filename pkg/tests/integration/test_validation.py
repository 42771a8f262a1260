import pytest

from spinchain.errors import SpinChainError
from spinchain.validation import (
    CHECKS,
    DEFAULT_SAMPLES,
    DEFAULT_TOL,
    XY_MAX_TIME,
    XY_PARAMETER_SETS,
    validation_suite,
)


@pytest.mark.parametrize("seed", [0, 1])
def test_suite_passes_on_default_ring(seed):
    reports = validation_suite(seed=seed)
    assert len(reports) == 7
    failed = [str(r) for r in reports if not r.passed]
    assert not failed, failed


def test_every_check_samples_at_least_twenty_points():
    assert DEFAULT_SAMPLES >= 20
    reports = validation_suite(n=6, seed=4)
    assert [r.name for r in reports] == [name for name, _ in CHECKS]
    assert all(r.samples == DEFAULT_SAMPLES for r in reports)
    assert all(f"over {DEFAULT_SAMPLES} samples" in str(r) for r in reports)


def test_xy_samples_cover_every_field_regime():
    fields = {p.h for p in XY_PARAMETER_SETS}
    assert {0.1, 1.0, 10.0} <= fields
    assert XY_MAX_TIME <= 5.0
    # one sample per parameter set is enough to pass through all of them
    reports = validation_suite(n=8, seed=9, samples=len(XY_PARAMETER_SETS))
    (xy,) = [r for r in reports if r.name.startswith("xy")]
    assert xy.samples == len(XY_PARAMETER_SETS)
    assert xy.passed, str(xy)


def test_suite_handles_odd_rings():
    reports = validation_suite(n=7, tol=DEFAULT_TOL, seed=2, samples=5)
    assert all(r.passed for r in reports)
    assert any(r.name.startswith("xy") for r in reports)


def test_suite_is_reproducible():
    first = validation_suite(n=6, seed=5, samples=4)
    second = validation_suite(n=6, seed=5, samples=4)
    assert [r.max_abs_diff for r in first] == [r.max_abs_diff for r in second]


def test_suite_needs_a_sample():
    with pytest.raises(SpinChainError):
        validation_suite(samples=0)
