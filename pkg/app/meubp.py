"""Hybrid sum/MEU message passing on junction graphs, parameterized by temperature.

Normal clusters send sum-product messages. Decision clusters send

    m_{k->l} ∝ sum_{c_k \\ s_kl} sigma_k[psi_k m_{~k}; eps] / m_{l->k}

where sigma_k[b; eps] = b * b_eps(x_d | x_pa)^(1 - eps) and b_eps is the
power-normalized (annealed) conditional. eps = 0 is the exact argmax limit
with ties split uniformly.
"""
import logging
import time
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import DegenerateSliceError
from .evaluate import joint_log_table, log_expected_utility, round_strategy
from .factors import (
    DiscreteFactor,
    entropy,
    expectation,
    factor_combine,
    factor_divide,
    factor_power_normalize,
    marginal,
)
from .juncgraph import JunctionGraph
from .models import JOINT_TABLE_CAP, AugmentedModel, BpOptions, Strategy, TraceRow

logger = logging.getLogger(__name__)

TIE_TOL = BpOptions().tie_tol
MAX_SWEEPS = BpOptions().max_iters
TOL = BpOptions().tol

DirectedEdge = Tuple[int, int]
OnDegenerate = Literal["raise", "uniform"]


class MessageSet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    messages: Dict[DirectedEdge, DiscreteFactor] = Field(default_factory=dict)


class Beliefs(BaseModel):
    """b (cluster beliefs), separator beliefs m_kl m_lk, and marginals tau."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    epsilon: float
    clusters: Dict[int, DiscreteFactor]
    separators: Dict[DirectedEdge, DiscreteFactor]
    marginals: Dict[int, DiscreteFactor]


class ConsistencyReport(BaseModel):
    residuals: Dict[str, float] = Field(default_factory=dict)
    max_residual: float = 0.0


# ---------------------------------------------------------------------
# LOCAL OPERATORS
# ---------------------------------------------------------------------
def _argmax_rows(log_rows: np.ndarray, tie_tol: float) -> np.ndarray:
    top = np.max(log_rows, axis=-1, keepdims=True)
    ties = log_rows >= top - tie_tol
    with np.errstate(divide="ignore"):
        return np.where(ties, -np.log(ties.sum(axis=-1, keepdims=True)), -np.inf)


def _policy(b: DiscreteFactor, d: int, parents: Sequence[int], epsilon: float, tie_tol: float, on_degenerate: OnDegenerate) -> DiscreteFactor:
    fam = tuple(parents) + (d,)
    local = marginal(b, fam).transpose(fam)
    rows = local.log_values
    dead = np.isneginf(rows).all(axis=-1, keepdims=True)
    if dead.any():
        if on_degenerate == "raise":
            raise DegenerateSliceError(f"all-zero belief row for decision {d}")
        rows = np.where(dead, 0.0, rows)
        local = DiscreteFactor(fam, local.cards, rows)
    if epsilon > 0:
        return factor_power_normalize(local, [d], 1.0 / epsilon)
    return DiscreteFactor(fam, local.cards, _argmax_rows(rows, tie_tol))


def anneal_policy(
    b: DiscreteFactor,
    d: int,
    parents: Sequence[int],
    epsilon: float,
    tie_tol: float = TIE_TOL,
) -> DiscreteFactor:
    """b(x_d, x_pa)^(1/eps) normalized over x_d; eps = 0 gives the tie-split argmax."""
    if epsilon < 0:
        raise ValueError("temperature must be non-negative")
    return _policy(b, d, parents, epsilon, tie_tol, "raise")


def _sigma(b: DiscreteFactor, d: int, parents: Sequence[int], epsilon: float, tie_tol: float) -> DiscreteFactor:
    if epsilon >= 1.0:
        return b
    policy = _policy(b, d, parents, epsilon, tie_tol, "uniform")
    table = b.log_values + (1.0 - epsilon) * policy.aligned(b.scope, b.cards)
    return DiscreteFactor(b.scope, b.cards, table)


def sigma(
    b: DiscreteFactor,
    d: int,
    parents: Sequence[int],
    epsilon: float,
    tie_tol: float = TIE_TOL,
) -> DiscreteFactor:
    if epsilon < 1.0:
        anneal_policy(b, d, parents, epsilon, tie_tol)
    return _sigma(b, d, parents, epsilon, tie_tol)


def _damp(new: DiscreteFactor, old: Optional[DiscreteFactor], damping: float) -> DiscreteFactor:
    if old is None or damping <= 0:
        return new
    table = (1.0 - damping) * new.log_values + damping * old.aligned(new.scope, new.cards)
    return DiscreteFactor(new.scope, new.cards, table).normalize()


def _log_change(new: DiscreteFactor, old: Optional[DiscreteFactor]) -> float:
    if old is None:
        return float("inf")
    a, b = new.log_values, old.aligned(new.scope, new.cards)
    both_zero = np.isneginf(a) & np.isneginf(b)
    with np.errstate(invalid="ignore"):
        diff = np.where(both_zero, 0.0, np.abs(a - b))
    return float(np.max(diff, initial=0.0))


def sweep_order(jg: JunctionGraph) -> List[Tuple[int, int, Tuple[int, ...]]]:
    """Directed edges for one forward-backward pass over a BFS ordering of the clusters."""
    g = jg.graph()
    rank: Dict[int, int] = {}
    for start in sorted(g.nodes):
        if start in rank:
            continue
        rank[start] = len(rank)
        for _, child in nx.bfs_edges(g, start):
            rank[child] = len(rank)
    nbrs = jg.neighbors()
    ordered = sorted(rank, key=rank.get)
    collect = [(k, l, s) for k in reversed(ordered) for l, s in sorted(nbrs[k]) if rank[l] < rank[k]]
    distribute = [(k, l, s) for k in ordered for l, s in sorted(nbrs[k]) if rank[l] > rank[k]]
    return collect + distribute


def place_policies(jg: JunctionGraph, strategy: Strategy, exclude: Sequence[int] = ()) -> Dict[int, List[DiscreteFactor]]:
    placed: Dict[int, List[DiscreteFactor]] = {}
    for d, f in strategy.policies.items():
        if d in exclude:
            continue
        placed.setdefault(jg.decision_clusters[d], []).append(f)
    return placed


# ---------------------------------------------------------------------
# ENGINE
# ---------------------------------------------------------------------
class MeuBeliefPropagation:
    """Owns the mutable message state of one run over a shared graph and model."""

    def __init__(
        self,
        jg: JunctionGraph,
        model: AugmentedModel,
        options: BpOptions,
        extra: Optional[Dict[int, List[DiscreteFactor]]] = None,
        init: Optional[MessageSet] = None,
        sum_only: bool = False,
    ):
        self.jg = jg
        self.options = options
        self.sum_only = sum_only
        self.nbrs = jg.neighbors()
        self.order = sweep_order(jg)
        self.scopes = {c.id: c.scope for c in jg.clusters}
        self.decision_of = {c.id: c.decision for c in jg.clusters}
        self.set_potentials(model, extra)
        self.messages: Dict[DirectedEdge, DiscreteFactor] = uniform_messages(jg).messages
        if init is not None:
            self.messages.update(init.messages)

    def set_potentials(self, model: AugmentedModel, extra: Optional[Dict[int, List[DiscreteFactor]]] = None) -> None:
        self.model = model
        self.psi: Dict[int, DiscreteFactor] = {}
        for c in self.jg.clusters:
            cards = [self.jg.cards[v] for v in c.scope]
            parts = [DiscreteFactor.ones(c.scope, cards)] + [model.factors[i] for i in c.factors]
            parts.extend((extra or {}).get(c.id, []))
            self.psi[c.id] = factor_combine(parts).transpose(c.scope)

    def incoming(self, k: int, exclude: Optional[int] = None) -> DiscreteFactor:
        scope = self.scopes[k]
        parts = [self.psi[k]] + [self.messages[(j, k)] for j, _ in self.nbrs[k] if j != exclude]
        return factor_combine(parts).transpose(scope)

    def is_decision(self, k: int) -> bool:
        return not self.sum_only and self.decision_of[k] is not None

    def message(self, k: int, l: int, sep: Tuple[int, ...], epsilon: float) -> DiscreteFactor:
        if self.is_decision(k) and epsilon < 1.0:
            d = self.decision_of[k]
            b = self.incoming(k)
            local = _sigma(b, d, self.jg.decisions[d], epsilon, self.options.tie_tol)
            out = factor_divide(marginal(local, sep).transpose(sep), self.messages[(l, k)])
        else:
            out = marginal(self.incoming(k, exclude=l), sep).transpose(sep)
        return out.normalize()

    def sweep(self, epsilon: float) -> float:
        residual = 0.0
        for k, l, sep in self.order:
            old = self.messages.get((k, l))
            new = _damp(self.message(k, l, sep, epsilon), old, self.options.damping)
            residual = max(residual, _log_change(new, old))
            self.messages[(k, l)] = new
        return residual

    def beliefs(self, epsilon: float) -> Beliefs:
        clusters, marginals, separators = {}, {}, {}
        for c in self.jg.clusters:
            b = self.incoming(c.id).normalize()
            clusters[c.id] = b
            if self.is_decision(c.id):
                marginals[c.id] = _sigma(b, c.decision, self.jg.decisions[c.decision], epsilon, self.options.tie_tol).normalize()
            else:
                marginals[c.id] = b
        for e in self.jg.edges:
            prod = factor_combine([self.messages[(e.a, e.b)], self.messages[(e.b, e.a)]])
            separators[(e.a, e.b)] = prod.transpose(e.separator).normalize()
        return Beliefs(epsilon=epsilon, clusters=clusters, separators=separators, marginals=marginals)

    def message_set(self) -> MessageSet:
        return MessageSet(messages=dict(self.messages))


def _edge_separator(jg: JunctionGraph, k: int, l: int) -> Tuple[int, ...]:
    for j, sep in jg.neighbors()[k]:
        if j == l:
            return sep
    raise ValueError(f"clusters {k} and {l} are not adjacent")


def sum_message(jg: JunctionGraph, model: AugmentedModel, messages: MessageSet, k: int, l: int, damping: float = 0.0) -> DiscreteFactor:
    """Sum-product message k -> l from the current message set, damped against the old k -> l."""
    engine = MeuBeliefPropagation(jg, model, BpOptions(damping=damping), init=messages, sum_only=True)
    new = engine.message(k, l, _edge_separator(jg, k, l), 1.0)
    return _damp(new, messages.messages.get((k, l)), damping)


def meu_message(jg: JunctionGraph, model: AugmentedModel, messages: MessageSet, k: int, l: int, epsilon: float, damping: float = 0.0) -> DiscreteFactor:
    if jg.clusters[k].decision is None:
        raise ValueError(f"cluster {k} holds no decision")
    engine = MeuBeliefPropagation(jg, model, BpOptions(damping=damping), init=messages)
    new = engine.message(k, l, _edge_separator(jg, k, l), epsilon)
    return _damp(new, messages.messages.get((k, l)), damping)


def uniform_messages(jg: JunctionGraph) -> MessageSet:
    out = {}
    for e in jg.edges:
        cards = [jg.cards[v] for v in e.separator]
        f = DiscreteFactor.ones(e.separator, cards).normalize()
        out[(e.a, e.b)] = f
        out[(e.b, e.a)] = f
    return MessageSet(messages=out)


def random_messages(jg: JunctionGraph, rng: np.random.Generator) -> MessageSet:
    """Entries i.i.d. uniform on (0, 1], then normalized."""
    out = {}
    for e in jg.edges:
        cards = [jg.cards[v] for v in e.separator]
        for key in ((e.a, e.b), (e.b, e.a)):
            values = 1.0 - rng.random(tuple(cards))
            out[key] = DiscreteFactor.from_values(e.separator, cards, values).normalize()
    return MessageSet(messages=out)


def sum_inference(
    jg: JunctionGraph,
    model: AugmentedModel,
    extra: Optional[Dict[int, List[DiscreteFactor]]] = None,
    max_sweeps: int = MAX_SWEEPS,
    tol: float = TOL,
    init: Optional[MessageSet] = None,
) -> MeuBeliefPropagation:
    """Plain sum-product propagation; one sweep is exact on a tree."""
    engine = MeuBeliefPropagation(jg, model, BpOptions(schedule="fixed", epsilon=1.0), extra=extra, init=init, sum_only=True)
    sweeps = 1 if jg.is_tree else max_sweeps
    for t in range(sweeps):
        residual = engine.sweep(1.0)
        if residual < tol and t > 0:
            break
    return engine


def strategy_messages(jg: JunctionGraph, model: AugmentedModel, strategy: Strategy, max_sweeps: int = 10) -> MessageSet:
    """Messages of a sum-product pass with the strategy's policies on the decision clusters."""
    return sum_inference(jg, model, place_policies(jg, strategy), max_sweeps=max_sweeps).message_set()


def policy_marginals(jg: JunctionGraph, model: AugmentedModel, strategy: Strategy, d: int, max_sweeps: int = MAX_SWEEPS) -> DiscreteFactor:
    """Table over (*pa(d), d) proportional to E(u | x_fam(d); delta_{-d}) up to a per-row constant."""
    engine = sum_inference(jg, model, place_policies(jg, strategy, exclude=[d]), max_sweeps=max_sweeps)
    k = jg.decision_clusters[d]
    fam = tuple(jg.decisions[d]) + (d,)
    return marginal(engine.incoming(k), fam).transpose(fam)


# ---------------------------------------------------------------------
# STRATEGY EXTRACTION / DIAGNOSTICS
# ---------------------------------------------------------------------
def extract_strategy(
    beliefs: Beliefs,
    jg: JunctionGraph,
    tie_tol: float = TIE_TOL,
    on_degenerate: OnDegenerate = "raise",
) -> Strategy:
    policies = {}
    for d, k in jg.decision_clusters.items():
        policies[d] = _policy(beliefs.clusters[k], d, jg.decisions[d], beliefs.epsilon, tie_tol, on_degenerate)
    return Strategy(policies=policies)


def check_reparameterization(model: AugmentedModel, beliefs: Beliefs, jg: JunctionGraph, cap: float = JOINT_TABLE_CAP) -> float:
    """max_x |log q(x) - log(prod b_k / prod b_s) - c| with the best constant c.

    Assignments where some separator belief is zero are skipped (0/0 there).
    """
    q = joint_log_table(model, cap=cap)
    scope, cards = q.scope, q.cards
    seps = [b.aligned(scope, cards) for b in beliefs.separators.values()]
    dead = np.zeros(cards, dtype=bool)
    for s in seps:
        dead = dead | np.isneginf(s)
    rhs = np.zeros(cards)
    for b in beliefs.clusters.values():
        rhs = rhs + np.where(dead, 0.0, b.aligned(scope, cards))
    for s in seps:
        rhs = rhs - np.where(dead, 0.0, s)
    keep = ~dead
    lhs = q.log_values
    if (np.isneginf(lhs[keep]) != np.isneginf(rhs[keep])).any():
        return float("inf")
    live = keep & np.isfinite(lhs)
    if not live.any():
        return 0.0
    diff = lhs[live] - rhs[live]
    return float((diff.max() - diff.min()) / 2.0)


def _linear_gap(a: DiscreteFactor, b: DiscreteFactor) -> float:
    a = a.normalize()
    b = b.normalize().transpose(a.scope)
    return float(np.max(np.abs(a.values - b.values), initial=0.0))


def check_fixed_point_consistency(beliefs: Beliefs, jg: JunctionGraph, epsilon: Optional[float] = None, tie_tol: float = TIE_TOL) -> ConsistencyReport:
    epsilon = beliefs.epsilon if epsilon is None else epsilon
    report = ConsistencyReport()
    for e in jg.edges:
        sep_belief = beliefs.separators[(e.a, e.b)]
        for k, l in ((e.a, e.b), (e.b, e.a)):
            c = jg.clusters[k]
            b = beliefs.clusters[k]
            if c.decision is not None:
                b = _sigma(b, c.decision, jg.decisions[c.decision], epsilon, tie_tol)
            report.residuals[f"{k}->{l}"] = _linear_gap(marginal(b, e.separator).transpose(e.separator), sep_belief)
    report.max_residual = max(report.residuals.values(), default=0.0)
    return report


def junction_free_energy(beliefs: Beliefs, model: AugmentedModel, jg: JunctionGraph, epsilon: Optional[float] = None) -> float:
    """<theta, tau> + sum_k H(c_k) - sum_dec (1 - eps) H(d | pa) - sum_edges H(s_kl)."""
    epsilon = beliefs.epsilon if epsilon is None else epsilon
    value = 0.0
    for c in jg.clusters:
        tau = beliefs.marginals[c.id]
        if c.factors:
            psi = factor_combine([model.factors[i] for i in c.factors])
            value += expectation(tau, psi.aligned(tau.scope, tau.cards) + np.zeros(tau.cards))
        value += entropy(tau)
        if c.decision is not None:
            parents = jg.decisions[c.decision]
            fam = marginal(tau, tuple(parents) + (c.decision,))
            cond = entropy(fam) - (entropy(marginal(tau, parents)) if parents else 0.0)
            value -= (1.0 - epsilon) * cond
    for sep in beliefs.separators.values():
        value -= entropy(sep)
    return value


# ---------------------------------------------------------------------
# DRIVER
# ---------------------------------------------------------------------
def strategy_change(new: Strategy, old: Optional[Strategy]) -> float:
    """Max per-row total-variation distance between two strategies."""
    if old is None:
        return float("inf")
    worst = 0.0
    for d, f in new.policies.items():
        gap = 0.5 * np.abs(f.values - old.policies[d].values).sum(axis=-1)
        worst = max(worst, float(np.max(gap, initial=0.0)))
    return worst


def run_bp(
    jg: JunctionGraph,
    model: AugmentedModel,
    options: BpOptions,
    init: Optional[MessageSet] = None,
    *,
    extra: Optional[Dict[int, List[DiscreteFactor]]] = None,
    hook: Optional[Callable[[int, MeuBeliefPropagation], None]] = None,
    observer: Optional[Callable[[int, Strategy, float], None]] = None,
    trace: bool = True,
    start_iter: int = 1,
) -> Tuple[Beliefs, MessageSet, List[TraceRow]]:
    """Forward-backward sweeps until messages and the extracted strategy settle.

    `hook(t, engine)` runs before sweep t and may swap the potentials;
    `observer(t, rounded, log_eu)` sees the rounded strategy after each sweep.
    """
    engine = MeuBeliefPropagation(jg, model, options, extra=extra, init=init)
    diagram = model.diagram
    rows: List[TraceRow] = []
    previous: Optional[Strategy] = None
    started = time.perf_counter()
    beliefs = engine.beliefs(options.temperature(start_iter))
    for t in range(start_iter, start_iter + options.max_iters):
        epsilon = options.temperature(t)
        if hook is not None:
            hook(t, engine)
        residual = engine.sweep(epsilon)
        beliefs = engine.beliefs(epsilon)
        strategy = extract_strategy(beliefs, jg, options.tie_tol, on_degenerate="uniform")
        change = strategy_change(strategy, previous)
        previous = strategy
        if observer is not None or trace:
            rounded = round_strategy(strategy)
            rounded_log_eu = log_expected_utility(diagram, rounded)
        if observer is not None:
            observer(t, rounded, rounded_log_eu)
        if trace:
            rows.append(
                TraceRow(
                    algorithm=options.label,
                    junction=jg.kind,
                    seed=options.seed or 0,
                    iter=t,
                    temp_or_w=epsilon,
                    rounded_eu=float(np.exp(rounded_log_eu)),
                    soft_eu=float(np.exp(log_expected_utility(diagram, strategy))),
                    residual=residual,
                    ms=(time.perf_counter() - started) * 1000.0,
                )
            )
        if residual < options.tol and change < options.tol:
            logger.debug("%s converged after %d sweeps", options.label, t - start_iter + 1)
            break
    else:
        if not jg.is_tree:
            logger.info("%s stopped at the sweep cap with residual %.3g", options.label, residual)
    return beliefs, engine.message_set(), rows
