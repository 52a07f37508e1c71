import numpy as np
import pytest
from scipy.special import logsumexp

from app.errors import DegenerateSliceError
from app.evaluate import build_augmented_model, expected_utility, joint_log_table, round_strategy
from app.factors import DiscreteFactor, log_partition, marginal
from app.juncgraph import build_junction_tree, build_loopy_junction_graph
from app.meubp import (
    MeuBeliefPropagation,
    anneal_policy,
    check_fixed_point_consistency,
    check_reparameterization,
    extract_strategy,
    junction_free_energy,
    meu_message,
    policy_marginals,
    random_messages,
    run_bp,
    sigma,
    strategy_change,
    sum_inference,
    sum_message,
    uniform_messages,
)
from app.models import BpOptions, InfluenceDiagram, Strategy, Variable


def _row(values):
    return DiscreteFactor.from_values((0,), (len(values),), values)


def _tree(diagram):
    model = build_augmented_model(diagram)
    return model, build_junction_tree(model)


# ---------------------------------------------------------------------
# LOCAL OPERATORS
# ---------------------------------------------------------------------
def test_anneal_policy_temperatures():
    b = _row([0.25, 0.75])
    assert np.allclose(anneal_policy(b, 0, (), 1.0).values, [0.25, 0.75])
    assert np.allclose(anneal_policy(b, 0, (), 0.5).values, [0.1, 0.9])
    tie = _row([0.4, 0.4, 0.2])
    assert np.allclose(anneal_policy(tie, 0, (), 0.0).values, [0.5, 0.5, 0.0])


def test_anneal_policy_errors():
    with pytest.raises(ValueError):
        anneal_policy(_row([0.5, 0.5]), 0, (), -0.1)
    dead = DiscreteFactor.from_values((0, 1), (2, 2), [[0.0, 0.0], [0.3, 0.7]])
    with pytest.raises(DegenerateSliceError):
        anneal_policy(dead, 1, (0,), 0.0)


def test_sigma_values():
    b = _row([0.25, 0.75])
    assert np.allclose(sigma(b, 0, (), 1.0).values, [0.25, 0.75])
    assert np.allclose(sigma(b, 0, (), 0.0).values, [0.0, 0.75])
    assert np.allclose(sigma(b, 0, (), 0.5).values, [0.25 * np.sqrt(0.1), 0.75 * np.sqrt(0.9)])


def test_sigma_conditions_on_parents():
    b = DiscreteFactor.from_values((0, 1), (2, 2), [[0.1, 0.3], [0.4, 0.2]])
    out = sigma(b, 1, (0,), 0.0).values
    assert np.allclose(out, [[0.0, 0.3], [0.4, 0.0]])


# ---------------------------------------------------------------------
# MESSAGES
# ---------------------------------------------------------------------
def test_meu_message_reduces_to_sum_message_at_unit_temperature(copy_pair_id):
    model, jg = _tree(copy_pair_id)
    messages = random_messages(jg, np.random.default_rng(4))
    for e in jg.edges:
        for k, l in ((e.a, e.b), (e.b, e.a)):
            a = meu_message(jg, model, messages, k, l, 1.0)
            b = sum_message(jg, model, messages, k, l)
            assert np.abs(a.log_values - b.log_values).max() < 1e-12


def test_meu_message_needs_decision_cluster(chain_id):
    model, jg = _tree(chain_id)
    with pytest.raises(ValueError):
        meu_message(jg, model, uniform_messages(jg), 0, 1, 0.0)


def test_uniform_psi_gives_uniform_message(chain_id):
    model, jg = _tree(chain_id)
    flat = model.with_factors([DiscreteFactor.ones(f.scope, f.cards) for f in model.factors])
    e = jg.edges[0]
    m = sum_message(jg, flat, uniform_messages(jg), e.a, e.b)
    assert np.allclose(m.values, 0.5)


def test_random_messages_are_normalized(blind_pair_id):
    model = build_augmented_model(blind_pair_id)
    jg = build_loopy_junction_graph(model)
    messages = random_messages(jg, np.random.default_rng(0))
    assert len(messages.messages) == 2 * len(jg.edges)
    for m in messages.messages.values():
        assert np.all(m.values > 0)
        assert m.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_temperature_sweep_selects_a_mode(blind_pair_id):
    model = build_augmented_model(blind_pair_id)
    jg = build_loopy_junction_graph(model)
    beliefs, _, _ = run_bp(jg, model, BpOptions(schedule="zero", max_iters=1), trace=False)
    strategy = extract_strategy(beliefs, jg, on_degenerate="uniform")
    assert round_strategy(strategy).is_deterministic
    assert policy_marginals(jg, model, round_strategy(strategy), 0).values.sum() > 0


# ---------------------------------------------------------------------
# DRIVER
# ---------------------------------------------------------------------
def test_tree_without_decisions_gives_exact_marginals(chain_id):
    model, jg = _tree(chain_id)
    beliefs, messages, trace = run_bp(jg, model, BpOptions(schedule="fixed", epsilon=1.0))
    assert len(trace) <= 2
    joint = joint_log_table(model).normalize()
    for c in jg.clusters:
        exact = marginal(joint, c.scope).transpose(c.scope)
        assert np.allclose(beliefs.clusters[c.id].values, exact.values, atol=1e-12)
    for m in messages.messages.values():
        assert np.exp(logsumexp(m.log_values)) == pytest.approx(1.0, abs=1e-12)


def test_copy_problem_reaches_exact_meu(copy_pair_id):
    model, jg = _tree(copy_pair_id)
    options = BpOptions(schedule="zero")
    beliefs, _, trace = run_bp(jg, model, options)
    assert len(trace) < options.max_iters
    strategy = round_strategy(extract_strategy(beliefs, jg, on_degenerate="uniform"))
    assert expected_utility(copy_pair_id, strategy) == pytest.approx(2.0)
    assert junction_free_energy(beliefs, model, jg) == pytest.approx(np.log(2.0), abs=1e-9)
    report = check_fixed_point_consistency(beliefs, jg)
    assert report.max_residual <= 1e-9
    assert trace[-1].rounded_eu == pytest.approx(2.0)


def test_unconverged_snapshot_reports_residual(blind_pair_id):
    model = build_augmented_model(blind_pair_id)
    jg = build_loopy_junction_graph(model)
    messages = random_messages(jg, np.random.default_rng(1))
    engine = sum_inference(jg, model, max_sweeps=1, init=messages)
    engine.messages.update(random_messages(jg, np.random.default_rng(2)).messages)
    report = check_fixed_point_consistency(engine.beliefs(1.0), jg, 1.0)
    assert report.max_residual > 1e-6
    assert set(report.residuals) == {f"{e.a}->{e.b}" for e in jg.edges} | {f"{e.b}->{e.a}" for e in jg.edges}


def test_free_energy_at_unit_temperature_is_log_partition(chain_id):
    model, jg = _tree(chain_id)
    beliefs = sum_inference(jg, model).beliefs(1.0)
    assert junction_free_energy(beliefs, model, jg, 1.0) == pytest.approx(log_partition(model.factors), abs=1e-10)


def test_reparameterization_holds_after_a_sweep(chain_id, small_limids):
    model, jg = _tree(chain_id)
    assert check_reparameterization(model, sum_inference(jg, model).beliefs(1.0), jg) <= 1e-8
    for diagram in small_limids(3):
        model, jg = _tree(diagram)
        engine = sum_inference(jg, model, init=random_messages(jg, np.random.default_rng(0)))
        assert check_reparameterization(model, engine.beliefs(1.0), jg) <= 1e-8


@pytest.mark.parametrize("schedule,epsilon", [("zero", 0.0), ("fixed", 0.5)])
def test_reparameterization_holds_after_every_meu_sweep(schedule, epsilon, copy_pair_id, blind_pair_id, small_limids):
    residuals = []

    def record(t, engine):
        residuals.append(check_reparameterization(engine.model, engine.beliefs(epsilon), engine.jg))

    for diagram in [copy_pair_id, blind_pair_id, *small_limids(10)]:
        model, jg = _tree(diagram)
        options = BpOptions(schedule=schedule, epsilon=epsilon, max_iters=6)
        beliefs, _, _ = run_bp(jg, model, options, hook=record, trace=False)
        residuals.append(check_reparameterization(model, beliefs, jg))
    assert max(residuals) <= 1e-8


def test_reparameterization_skips_zero_separator_entries(copy_pair_id):
    model, jg = _tree(copy_pair_id)
    beliefs, _, _ = run_bp(jg, model, BpOptions(schedule="zero"), trace=False)
    assert any(np.isneginf(s.log_values).any() for s in beliefs.separators.values())
    assert check_reparameterization(model, beliefs, jg) <= 1e-10


def test_reparameterization_single_cluster_and_corruption(chain_id):
    single = InfluenceDiagram(
        variables=[Variable(id=0, cardinality=2)],
        cpts={0: DiscreteFactor.from_values((0,), (2,), [0.3, 0.7])},
        utilities=[DiscreteFactor.from_values((0,), (2,), [2.0, 1.0])],
        utility_mode="multiplicative",
    )
    model, jg = _tree(single)
    assert check_reparameterization(model, sum_inference(jg, model).beliefs(1.0), jg) == pytest.approx(0.0, abs=1e-12)

    model, jg = _tree(chain_id)
    beliefs = sum_inference(jg, model).beliefs(1.0)
    k = jg.clusters[0]
    bad = DiscreteFactor.from_values(k.scope, [2] * len(k.scope), np.array([0.7, 0.1, 0.1, 0.1]).reshape((2, 2)))
    corrupted = beliefs.model_copy(update={"clusters": {**beliefs.clusters, k.id: bad}})
    assert check_reparameterization(model, corrupted, jg) > 1e-3


def test_policy_marginals_fix_other_decisions(blind_pair_id):
    model, jg = _tree(blind_pair_id)
    other_one = Strategy.from_choices(blind_pair_id, {0: 0, 1: 1})
    table = policy_marginals(jg, model, other_one, 0).values
    assert table[1] / table[0] == pytest.approx(20.0)


def test_strategy_change(blind_pair_id):
    fixed = Strategy.from_choices(blind_pair_id, {0: 1, 1: 1})
    assert strategy_change(fixed, fixed) == 0.0
    assert strategy_change(fixed, Strategy.uniform(blind_pair_id)) == pytest.approx(0.5)
    assert strategy_change(fixed, None) == float("inf")


def _graph(diagram, junction):
    model = build_augmented_model(diagram)
    return model, build_junction_tree(model) if junction == "tree" else build_loopy_junction_graph(model)


def _log_gap(a: DiscreteFactor, b: DiscreteFactor) -> float:
    x, y = a.log_values, b.transpose(a.scope).log_values
    assert (np.isneginf(x) == np.isneginf(y)).all()
    live = np.isfinite(x)
    return float(np.max(np.abs(x[live] - y[live]), initial=0.0))


@pytest.mark.parametrize("junction", ["tree", "loopy"])
@pytest.mark.parametrize("index", range(20))
def test_unit_temperature_reproduces_sum_product(index, junction, small_limids):
    model, jg = _graph(small_limids(20)[index], junction)
    beliefs, _, trace = run_bp(jg, model, BpOptions(schedule="fixed", epsilon=1.0, max_iters=8))
    reference = MeuBeliefPropagation(jg, model, BpOptions(schedule="fixed", epsilon=1.0), sum_only=True)
    for _ in trace:
        reference.sweep(1.0)
    expected = reference.beliefs(1.0)
    for k, b in beliefs.clusters.items():
        assert _log_gap(b, expected.clusters[k]) <= 1e-10
    for key, s in beliefs.separators.items():
        assert _log_gap(s, expected.separators[key]) <= 1e-10


@pytest.mark.parametrize("schedule,epsilon", [("zero", 0.0), ("fixed", 0.5)])
def test_fixed_points_are_consistent_on_random_trees(schedule, epsilon, small_limids):
    settled = 0
    for diagram in small_limids(10):
        model, jg = _tree(diagram)
        options = BpOptions(schedule=schedule, epsilon=epsilon, max_iters=200, tol=1e-12)
        beliefs, _, trace = run_bp(jg, model, options)
        if len(trace) == options.max_iters:
            continue
        settled += 1
        assert check_fixed_point_consistency(beliefs, jg).max_residual <= 1e-6
    assert settled >= 5
