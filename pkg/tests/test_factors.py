import itertools

import numpy as np
import pytest

from app.errors import DegenerateSliceError, ModelError, NumericalSupportError, ResourceCapError
from app.factors import (
    DiscreteFactor,
    entropy,
    factor_combine,
    factor_divide,
    factor_power_normalize,
    factor_reduce,
    interaction_graph,
    log_partition,
    min_fill_order,
)


def test_combine_identity_cases():
    f = DiscreteFactor.from_values((0,), (2,), [0.3, 0.7])
    assert factor_combine([f]) is f
    one = DiscreteFactor.ones((0,), (2,))
    assert np.allclose(factor_combine([f, one]).values, f.values)


def test_combine_multiplies_entries():
    f1 = DiscreteFactor.from_values((0,), (2,), [0.5, 0.5])
    f2 = DiscreteFactor.from_values((0,), (2,), [0.2, 0.8])
    assert np.allclose(factor_combine([f1, f2]).values, [0.1, 0.4])


def test_combine_is_commutative_and_associative():
    rng = np.random.default_rng(0)
    a = DiscreteFactor((0, 1), (2, 3), rng.normal(size=(2, 3)))
    b = DiscreteFactor((1, 2), (3, 2), rng.normal(size=(3, 2)))
    c = DiscreteFactor((2, 0), (2, 2), rng.normal(size=(2, 2)))
    scope = (0, 1, 2)
    left = factor_combine([factor_combine([a, b]), c]).transpose(scope)
    right = factor_combine([a, factor_combine([c, b])]).transpose(scope)
    assert np.abs(left.log_values - right.log_values).max() < 1e-12


def test_combine_respects_cap():
    f = DiscreteFactor.ones((0, 1), (10, 10))
    g = DiscreteFactor.ones((1, 2), (10, 10))
    with pytest.raises(ResourceCapError):
        factor_combine([f, g], cap=500)


def test_reduce_sum_and_max():
    f = DiscreteFactor.from_values((0,), (2,), [0.3, 0.7])
    assert factor_reduce(f, [], "sum") is f
    assert float(factor_reduce(f, [0], "sum").values) == pytest.approx(1.0)
    assert float(factor_reduce(f, [0], "max").values) == pytest.approx(0.7)


def test_reduce_unknown_variable():
    f = DiscreteFactor.ones((0,), (2,))
    with pytest.raises(ModelError):
        factor_reduce(f, [5])


def test_power_normalize():
    f = DiscreteFactor.from_values((0,), (2,), [0.25, 0.75])
    assert np.allclose(factor_power_normalize(f, [0], 1.0).values, [0.25, 0.75])
    assert np.allclose(factor_power_normalize(f, [0], 2.0).values, [0.1, 0.9])
    uniform = DiscreteFactor.from_values((0,), (2,), [0.5, 0.5])
    assert np.allclose(factor_power_normalize(uniform, [0], 4.0).values, [0.5, 0.5])


def test_power_normalize_zero_slice():
    f = DiscreteFactor.from_values((0, 1), (2, 2), [[0.0, 0.0], [0.5, 0.5]])
    with pytest.raises(DegenerateSliceError):
        factor_power_normalize(f, [1], 1.0)


def test_divide_zero_over_zero_is_zero():
    num = DiscreteFactor.from_values((0,), (2,), [0.0, 0.6])
    den = DiscreteFactor.from_values((0,), (2,), [0.0, 0.3])
    assert np.allclose(factor_divide(num, den).values, [0.0, 2.0])


def test_divide_positive_over_zero():
    num = DiscreteFactor.from_values((0,), (2,), [0.1, 0.6])
    den = DiscreteFactor.from_values((0,), (2,), [0.0, 0.3])
    with pytest.raises(NumericalSupportError):
        factor_divide(num, den)


def test_factor_validation():
    with pytest.raises(ModelError):
        DiscreteFactor((0, 1), (2, 2), np.zeros(3))
    with pytest.raises(ModelError):
        DiscreteFactor((0,), (2,), [0.0, np.nan])
    with pytest.raises(ModelError):
        DiscreteFactor((0, 0), (2, 2), np.zeros(4))
    with pytest.raises(ModelError):
        DiscreteFactor.from_values((0,), (2,), [-0.1, 1.1])


def test_from_values_keeps_linear_entries():
    f = DiscreteFactor.from_values((0,), (3,), [0.1, 0.2, 0.7])
    assert f.values.tolist() == [0.1, 0.2, 0.7]


def test_log_partition_matches_enumeration():
    rng = np.random.default_rng(3)
    factors = [
        DiscreteFactor((0, 1), (2, 3), rng.normal(size=(2, 3))),
        DiscreteFactor((1, 2), (3, 2), rng.normal(size=(3, 2))),
        DiscreteFactor((2, 3), (2, 2), rng.normal(size=(2, 2))),
    ]
    total = 0.0
    for x in itertools.product(range(2), range(3), range(2), range(2)):
        total += np.exp(factors[0].log_values[x[0], x[1]] + factors[1].log_values[x[1], x[2]] + factors[2].log_values[x[2], x[3]])
    assert log_partition(factors) == pytest.approx(np.log(total), abs=1e-12)


def test_min_fill_prefers_simplicial_vertices():
    adj = interaction_graph([(0, 1), (1, 2), (2, 3)], range(4))
    order = min_fill_order(adj, {v: 2 for v in range(4)})
    assert order[0] == 0
    assert sorted(order) == [0, 1, 2, 3]


def test_entropy_of_uniform():
    f = DiscreteFactor.ones((0, 1), (2, 2)).normalize()
    assert entropy(f) == pytest.approx(2 * np.log(2))
