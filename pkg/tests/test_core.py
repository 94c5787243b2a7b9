import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infokmeans.core import (Density, InvalidInput, Labeling, ReferenceMeasure, make_density,
                             validate_pointset)


def test_uniform_weights_give_unit_density():
    d = make_density([1, 1], ReferenceMeasure.uniform(2))
    assert np.allclose(d.log_values, 0.0)


def test_make_density_normalizes_against_nu():
    d = make_density([3, 1], ReferenceMeasure.uniform(2))
    # 1.5 * 0.5 + 0.5 * 0.5 == 1
    np.testing.assert_allclose(d.values, [1.5, 0.5], rtol=1e-15)


def test_all_zero_weights_rejected():
    with pytest.raises(InvalidInput):
        make_density([0, 0])


def test_zero_atoms_become_minus_infinity():
    d = make_density([0, 2, 2])
    assert d.log_values[0] == -np.inf
    assert list(d.support_mask) == [False, True, True]


def test_density_rejects_unnormalized_log_values():
    with pytest.raises(InvalidInput):
        Density(np.zeros(3) + 0.1, ReferenceMeasure.uniform(3))


def test_reference_measure_validation():
    with pytest.raises(InvalidInput):
        ReferenceMeasure(np.array([0.5, 0.6]))
    with pytest.raises(InvalidInput):
        ReferenceMeasure(np.array([1.0, 0.0]))
    nu = ReferenceMeasure.from_masses([1, 3])
    np.testing.assert_allclose(nu.weights, [0.25, 0.75])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30).filter(lambda w: sum(w) > 0),
       st.integers(0, 2**31))
def test_density_round_trip(weights, seed):
    rng = np.random.default_rng(seed)
    nu = ReferenceMeasure.from_masses(rng.uniform(0.1, 1.0, len(weights)))
    d = make_density(weights, nu)
    assert abs(np.sum(np.exp(d.log_values) * nu.weights) - 1.0) <= 1e-9


def test_pointset_bound_from_data():
    ps = validate_pointset([[0, 0], [3, 4]])
    assert ps.bound_B == 5.0


def test_pointset_claim_violation_names_index():
    with pytest.raises(InvalidInput, match="point 0"):
        validate_pointset([[1, 0]], 0.5)


def test_pointset_claim_accepted():
    ps = validate_pointset([[0.3, 0.4]], 1.0)
    assert ps.bound_B == 1.0


def test_pointset_rejects_nonfinite():
    with pytest.raises(InvalidInput, match="point 1"):
        validate_pointset([[0, 0], [np.nan, 1]])


def test_validate_pointset_idempotent():
    rng = np.random.default_rng(3)
    once = validate_pointset(rng.normal(size=(20, 3)))
    twice = validate_pointset(once)
    assert twice.bound_B == once.bound_B
    np.testing.assert_array_equal(twice.points, once.points)
    assert not once.points.flags.writeable


def test_labeling_range_checked():
    with pytest.raises(InvalidInput):
        Labeling([0, 2], 2)
    assert list(Labeling([0, 1, 1], 3).counts()) == [1, 2, 0]
