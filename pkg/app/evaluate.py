"""Augmented model construction and exact desk-scale evaluators."""
import itertools
import logging
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import ModelError, ResourceCapError
from .factors import (
    DiscreteFactor,
    entropy,
    expectation,
    factor_reduce,
    log_partition,
    marginal,
)
from .models import (
    ELIMINATION_CAP,
    JOINT_TABLE_CAP,
    STRATEGY_CAP,
    AugmentedModel,
    InfluenceDiagram,
    JointTable,
    Strategy,
)

logger = logging.getLogger(__name__)


def build_augmented_model(diagram: InfluenceDiagram) -> AugmentedModel:
    """CPTs times utilities; additive utilities go through a selector variable s.

    With |U| utilities, f_j(x, s) = u_j(x) when s == j and 1 otherwise, so
    summing s out of prod_j f_j gives sum_j u_j.
    """
    if not diagram.utilities:
        raise ModelError("influence diagram has no utility factors")
    factors: List[DiscreteFactor] = [diagram.cpts[i] for i in diagram.chance_ids]
    cards = {v.id: v.cardinality for v in diagram.variables}
    selector = None
    if diagram.utility_mode == "multiplicative":
        factors.extend(diagram.utilities)
    else:
        selector = diagram.n_vars
        n_u = len(diagram.utilities)
        cards[selector] = n_u
        for j, u in enumerate(diagram.utilities):
            table = np.zeros(u.cards + (n_u,))
            table[..., j] = u.log_values
            factors.append(DiscreteFactor(u.scope + (selector,), u.cards + (n_u,), table))
    decisions = {d: diagram.parents(d) for d in diagram.decision_ids}
    return AugmentedModel(factors=factors, cards=cards, selector_id=selector, decisions=decisions, diagram=diagram)


def policy_factors(diagram: InfluenceDiagram, strategy: Strategy) -> List[DiscreteFactor]:
    out = []
    for d in diagram.decision_ids:
        f = strategy.policies.get(d)
        if f is None:
            raise ModelError(f"strategy has no policy for decision {d}")
        if f.scope != diagram.fam(d) or f.cards != diagram.fam_cards(d):
            raise ModelError(f"policy of {d} has scope {f.scope}, expected {diagram.fam(d)}")
        out.append(f)
    return out


def log_expected_utility(diagram: InfluenceDiagram, strategy: Strategy, model: AugmentedModel | None = None) -> float:
    model = model or build_augmented_model(diagram)
    return log_partition(model.factors + policy_factors(diagram, strategy), cap=ELIMINATION_CAP)


def expected_utility(diagram: InfluenceDiagram, strategy: Strategy, model: AugmentedModel | None = None) -> float:
    return float(np.exp(log_expected_utility(diagram, strategy, model)))


def round_strategy(strategy: Strategy) -> Strategy:
    policies = {}
    for d, f in strategy.policies.items():
        pick = np.asarray(np.argmax(f.log_values, axis=-1))
        table = np.full(f.cards, -np.inf)
        np.put_along_axis(table, pick[..., None], 0.0, axis=-1)
        policies[d] = DiscreteFactor(f.scope, f.cards, table)
    return Strategy(policies=policies)


def joint_log_table(model: AugmentedModel, extra: List[DiscreteFactor] = (), cap: float = JOINT_TABLE_CAP) -> DiscreteFactor:
    """Unnormalized log product over every model variable, scope sorted by id."""
    scope = model.variables
    cards = [model.cards[v] for v in scope]
    size = float(np.prod(cards, dtype=float))
    if size > cap:
        raise ResourceCapError("joint table", size, cap)
    total = np.zeros(cards)
    for f in list(model.factors) + list(extra):
        total = total + f.aligned(scope, cards)
    return DiscreteFactor(scope, cards, total)


def strategy_induced_joint(diagram: InfluenceDiagram, strategy: Strategy, cap: float = JOINT_TABLE_CAP) -> JointTable:
    model = build_augmented_model(diagram)
    joint = joint_log_table(model, policy_factors(diagram, strategy), cap=cap)
    if not np.isfinite(joint.log_total()):
        raise ModelError("strategy-induced distribution has a zero normalizer")
    return JointTable(factor=joint.normalize())


def _strategy_count(diagram: InfluenceDiagram) -> Tuple[float, List[Tuple[int, int, int]]]:
    layout = []
    count = 1.0
    for d in diagram.decision_ids:
        cards = diagram.fam_cards(d)
        rows = int(np.prod(cards[:-1], dtype=int))
        layout.append((d, rows, cards[-1]))
        count *= float(cards[-1]) ** rows
    return count, layout


def brute_force_meu(diagram: InfluenceDiagram, cap: float = STRATEGY_CAP) -> Tuple[float, Strategy]:
    """Enumerate every deterministic strategy; first (lexicographic) maximizer wins."""
    model = build_augmented_model(diagram)
    count, layout = _strategy_count(diagram)
    if count > cap:
        raise ResourceCapError("deterministic strategy space", count, cap)
    if not layout:
        return float(np.exp(log_partition(model.factors, cap=ELIMINATION_CAP))), Strategy(policies={})

    n_vars = diagram.n_vars
    joint_size = float(np.prod(diagram.cards, dtype=float))
    logq = None
    if joint_size <= JOINT_TABLE_CAP:
        logq = joint_log_table(model)
        if model.selector_id is not None:
            logq = factor_reduce(logq, [model.selector_id], "sum")
        logq = logq.transpose(range(n_vars)).log_values

    per_decision = [itertools.product(range(card), repeat=rows) for _, rows, card in layout]
    best_log, best_choice = -np.inf, None
    for combo in itertools.product(*[list(p) for p in per_decision]):
        choices = {d: np.array(c, dtype=int).reshape(diagram.fam_cards(d)[:-1]) for (d, _, _), c in zip(layout, combo)}
        strategy = Strategy.from_choices(diagram, choices)
        if logq is not None:
            total = logq
            for f in policy_factors(diagram, strategy):
                total = total + f.aligned(range(n_vars), diagram.cards)
            with np.errstate(divide="ignore"):
                value = float(logsumexp(total))
        else:
            value = log_expected_utility(diagram, strategy, model)
        if value > best_log + 1e-12 * max(1.0, abs(best_log)) or best_choice is None:
            best_log, best_choice = value, choices
    logger.debug("brute force enumerated %d strategies", int(count))
    return float(np.exp(best_log)), Strategy.from_choices(diagram, best_choice)


def conditional_entropy(joint: DiscreteFactor, child: int, parents) -> float:
    fam = marginal(joint, list(parents) + [child])
    if not parents:
        return entropy(fam)
    return entropy(fam) - entropy(marginal(joint, parents))


def dual_objective(tau: JointTable, diagram: InfluenceDiagram, epsilon: float) -> float:
    """<theta, tau> + H(x) - (1 - eps) * sum_d H(x_d | x_pa(d)) on an explicit joint."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    model = build_augmented_model(diagram)
    if set(tau.scope) != set(model.cards):
        raise ModelError(f"joint over {sorted(tau.scope)} does not match model variables {model.variables}")
    joint = tau.factor
    theta = joint_log_table(model).aligned(joint.scope, joint.cards)
    value = expectation(joint, theta) + entropy(joint)
    for d, parents in model.decisions.items():
        value -= (1.0 - epsilon) * conditional_entropy(joint, d, parents)
    return value


def policy_map(strategy: Strategy) -> Dict[int, List[int]]:
    """Flat argmax choices per decision, row-major over parent configurations."""
    return {d: strategy.choices(d).ravel().tolist() for d in sorted(strategy.policies)}
