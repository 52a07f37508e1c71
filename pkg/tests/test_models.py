import itertools

import numpy as np
import pytest

from app.errors import ModelError, ResourceCapError
from app.evaluate import (
    brute_force_meu,
    build_augmented_model,
    dual_objective,
    expected_utility,
    joint_log_table,
    log_expected_utility,
    policy_map,
    round_strategy,
    strategy_induced_joint,
)
from app.factors import DiscreteFactor, factor_reduce, log_partition
from app.models import InfluenceDiagram, JointTable, Strategy, Variable


def _two_orphans(u_values) -> InfluenceDiagram:
    variables = [Variable(id=0, cardinality=2, kind="decision"), Variable(id=1, cardinality=2, kind="decision")]
    u = DiscreteFactor.from_values((0, 1), (2, 2), u_values)
    return InfluenceDiagram(variables=variables, utilities=[u], utility_mode="multiplicative")


# ---------------------------------------------------------------------
# VALIDATION
# ---------------------------------------------------------------------
def test_rejects_cycle():
    variables = [Variable(id=0, cardinality=2, parents=(1,)), Variable(id=1, cardinality=2, parents=(0,))]
    cpts = {
        0: DiscreteFactor.from_values((1, 0), (2, 2), [[0.5, 0.5], [0.5, 0.5]]),
        1: DiscreteFactor.from_values((0, 1), (2, 2), [[0.5, 0.5], [0.5, 0.5]]),
    }
    with pytest.raises(ModelError):
        InfluenceDiagram(variables=variables, cpts=cpts, utilities=[DiscreteFactor.ones((0,), (2,))])


def test_rejects_missing_cpt_and_decision_cpt():
    u = [DiscreteFactor.ones((0,), (2,))]
    with pytest.raises(ModelError):
        InfluenceDiagram(variables=[Variable(id=0, cardinality=2)], utilities=u)
    with pytest.raises(ModelError):
        InfluenceDiagram(
            variables=[Variable(id=0, cardinality=2, kind="decision")],
            cpts={0: DiscreteFactor.from_values((0,), (2,), [0.5, 0.5])},
            utilities=u,
        )


def test_rejects_unnormalized_cpt():
    with pytest.raises(ModelError):
        InfluenceDiagram(
            variables=[Variable(id=0, cardinality=2)],
            cpts={0: DiscreteFactor.from_values((0,), (2,), [0.5, 0.6])},
            utilities=[DiscreteFactor.ones((0,), (2,))],
        )


def test_rejects_sparse_ids():
    with pytest.raises(ModelError):
        InfluenceDiagram(variables=[Variable(id=1, cardinality=2, kind="decision")], utilities=[])


def test_utilities_are_clamped_relative_to_max():
    diagram = _two_orphans([[1.0, 0.0], [0.0, 2.0]])
    u = diagram.utilities[0].values
    assert u.min() == pytest.approx(2.0 * 1e-12)
    assert u.max() == pytest.approx(2.0)


# ---------------------------------------------------------------------
# AUGMENTED MODEL
# ---------------------------------------------------------------------
def test_multiplicative_augmented_model(observed_id):
    model = build_augmented_model(observed_id)
    assert len(model.factors) == 2
    assert model.selector_id is None


def test_additive_selector_sums_utilities():
    variables = [Variable(id=0, cardinality=2), Variable(id=1, cardinality=3)]
    cpts = {
        0: DiscreteFactor.from_values((0,), (2,), [0.4, 0.6]),
        1: DiscreteFactor.from_values((1,), (3,), [0.2, 0.3, 0.5]),
    }
    rng = np.random.default_rng(0)
    utilities = [
        DiscreteFactor.from_values((0,), (2,), rng.uniform(0.5, 2.0, 2)),
        DiscreteFactor.from_values((1,), (3,), rng.uniform(0.5, 2.0, 3)),
        DiscreteFactor.from_values((0, 1), (2, 3), rng.uniform(0.5, 2.0, (2, 3))),
    ]
    diagram = InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode="additive")
    model = build_augmented_model(diagram)
    assert model.selector_id == 2
    assert model.cards[2] == 3

    utility_only = model.with_factors(model.factors[2:])
    summed = factor_reduce(joint_log_table(utility_only), [2], "sum").transpose((0, 1))
    for a, b in itertools.product(range(2), range(3)):
        direct = utilities[0].values[a] + utilities[1].values[b] + utilities[2].values[a, b]
        assert np.exp(summed.log_values[a, b]) == pytest.approx(direct, rel=1e-12)

    expected = sum(
        cpts[0].values[a] * cpts[1].values[b] * (utilities[0].values[a] + utilities[1].values[b] + utilities[2].values[a, b])
        for a, b in itertools.product(range(2), range(3))
    )
    assert expected_utility(diagram, Strategy(policies={})) == pytest.approx(expected, rel=1e-10)


def test_single_additive_utility_uses_unit_selector():
    variables = [Variable(id=0, cardinality=2, kind="decision")]
    diagram = InfluenceDiagram(variables=variables, utilities=[DiscreteFactor.from_values((0,), (2,), [1.0, 2.0])])
    model = build_augmented_model(diagram)
    assert model.cards[model.selector_id] == 1


def test_empty_utilities_rejected():
    diagram = InfluenceDiagram(variables=[Variable(id=0, cardinality=2, kind="decision")], utilities=[])
    with pytest.raises(ModelError):
        build_augmented_model(diagram)


# ---------------------------------------------------------------------
# EXPECTED UTILITY / BRUTE FORCE
# ---------------------------------------------------------------------
def test_expected_utility_examples(observed_id, blind_pair_id):
    single = InfluenceDiagram(
        variables=[Variable(id=0, cardinality=2, kind="decision")],
        utilities=[DiscreteFactor.from_values((0,), (2,), [1.0, 2.0])],
        utility_mode="multiplicative",
    )
    assert expected_utility(single, Strategy.from_choices(single, {0: 1})) == pytest.approx(2.0)
    copy = Strategy.from_choices(observed_id, {1: np.array([0, 1])})
    assert expected_utility(observed_id, copy) == pytest.approx(1.0)
    both_zero = Strategy.from_choices(blind_pair_id, {0: 0, 1: 0})
    assert expected_utility(blind_pair_id, both_zero) == pytest.approx(1.0)


def test_expected_utility_needs_every_policy(blind_pair_id):
    partial = Strategy(policies={0: Strategy.uniform(blind_pair_id).policies[0]})
    with pytest.raises(ModelError):
        expected_utility(blind_pair_id, partial)


def test_brute_force_examples(blind_pair_id, blind_id, chain_id):
    meu, strategy = brute_force_meu(blind_pair_id)
    assert meu == pytest.approx(2.0)
    assert policy_map(strategy) == {0: [1], 1: [1]}

    meu, strategy = brute_force_meu(blind_id)
    assert meu == pytest.approx(0.7 + 0.3 * 0.01)
    assert policy_map(strategy) == {1: [1]}

    meu, strategy = brute_force_meu(chain_id)
    assert strategy.policies == {}
    assert np.log(meu) == pytest.approx(log_partition(build_augmented_model(chain_id).factors))


def test_brute_force_cap(blind_pair_id):
    with pytest.raises(ResourceCapError):
        brute_force_meu(blind_pair_id, cap=2)


def test_randomized_strategies_never_beat_deterministic_optimum(small_limids):
    for diagram in small_limids(5, max_strategies=256):
        meu, _ = brute_force_meu(diagram)
        rng = np.random.default_rng(11)
        for _ in range(20):
            assert expected_utility(diagram, Strategy.random(diagram, rng)) <= meu * (1 + 1e-9)


def test_round_strategy(blind_pair_id):
    policies = {
        0: DiscreteFactor.from_values((0,), (2,), [0.2, 0.8]),
        1: DiscreteFactor.from_values((1,), (2,), [0.5, 0.5]),
    }
    rounded = round_strategy(Strategy(policies=policies))
    assert rounded.policies[0].values.tolist() == [0.0, 1.0]
    assert rounded.policies[1].values.tolist() == [1.0, 0.0]
    assert round_strategy(rounded).policies[0].values.tolist() == [0.0, 1.0]
    assert rounded.is_deterministic


# ---------------------------------------------------------------------
# JOINT TABLES / DUAL OBJECTIVE
# ---------------------------------------------------------------------
def test_strategy_induced_joint(blind_pair_id):
    both_one = strategy_induced_joint(blind_pair_id, Strategy.from_choices(blind_pair_id, {0: 1, 1: 1}))
    assert both_one.factor.transpose((0, 1)).values[1, 1] == pytest.approx(1.0)
    uniform = strategy_induced_joint(blind_pair_id, Strategy.uniform(blind_pair_id))
    assert np.allclose(uniform.factor.transpose((0, 1)).values, np.array([[1.0, 0.1], [0.1, 2.0]]) / 3.2)


def test_joint_table_must_be_normalized():
    with pytest.raises(ModelError):
        JointTable(factor=DiscreteFactor.ones((0,), (2,)))


def test_dual_objective_examples(blind_pair_id):
    tau = strategy_induced_joint(blind_pair_id, Strategy.from_choices(blind_pair_id, {0: 1, 1: 1}))
    assert dual_objective(tau, blind_pair_id, 0.0) == pytest.approx(np.log(2.0))

    flat = _two_orphans([[1.0, 1.0], [1.0, 1.0]])
    uniform = JointTable(factor=DiscreteFactor.ones((0, 1), (2, 2)).normalize())
    assert dual_objective(uniform, flat, 1.0) == pytest.approx(2 * np.log(2.0))

    with pytest.raises(ValueError):
        dual_objective(uniform, flat, 1.5)


@pytest.mark.parametrize("index", range(25))
def test_dual_at_zero_temperature_is_log_eu(index, small_limids):
    diagram = small_limids(25, max_strategies=4096)[index]
    rng = np.random.default_rng(index)
    for _ in range(4):
        choices = {d: rng.integers(0, diagram.cards[d], size=diagram.fam_cards(d)[:-1]) for d in diagram.decision_ids}
        strategy = Strategy.from_choices(diagram, choices)
        tau = strategy_induced_joint(diagram, strategy)
        assert dual_objective(tau, diagram, 0.0) == pytest.approx(log_expected_utility(diagram, strategy), abs=1e-9)


def test_dual_without_decisions_peaks_at_log_partition(chain_id):
    model = build_augmented_model(chain_id)
    exact = JointTable(factor=joint_log_table(model).normalize())
    log_z = log_partition(model.factors)
    assert dual_objective(exact, chain_id, 0.5) == pytest.approx(log_z)
    rng = np.random.default_rng(2)
    for _ in range(10):
        other = JointTable(factor=DiscreteFactor.from_values(exact.scope, exact.factor.cards, rng.dirichlet(np.ones(8)).reshape(exact.factor.cards)))
        assert dual_objective(other, chain_id, 0.5) <= log_z + 1e-12
