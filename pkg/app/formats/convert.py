"""Bayes net to influence diagram: leaves become clamped utilities, some inner nodes decisions."""
import logging
from typing import Dict, List

import networkx as nx
import numpy as np

from ..errors import ModelError
from ..factors import DiscreteFactor
from ..models import InfluenceDiagram, UtilityMode, Variable
from .uai import UaiNetwork

logger = logging.getLogger(__name__)

# UAI tables are often printed with a few digits; rows further than this from one are rejected
ROW_SUM_TOL = 1e-3


def _cpt_rows(table: List[float], cards: List[int], child: int) -> np.ndarray:
    rows = np.asarray(table, dtype=float).reshape(cards)
    sums = rows.sum(axis=-1, keepdims=True)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        raise ModelError(f"factor for variable {child} is not a conditional table")
    return rows / sums


def bn_to_id(
    bn: UaiNetwork,
    decision_fraction: float = 0.0,
    seed: int = 0,
    mode: UtilityMode = "multiplicative",
) -> InfluenceDiagram:
    """Each leaf's CPT, clamped at a uniformly drawn state, becomes a utility over its parents.

    A uniformly drawn max(1, round(fraction * n_inner)) of the remaining
    variables become decisions (CPT dropped, parents kept as observations);
    ids are renumbered densely in their original order.
    """
    if not 0.0 <= decision_fraction < 1.0:
        raise ModelError("decision fraction must lie in [0, 1)")
    if len(bn.scopes) != bn.n_vars:
        raise ModelError(f"{len(bn.scopes)} factors for {bn.n_vars} variables; not a Bayes net")
    family: Dict[int, int] = {}
    for i, scope in enumerate(bn.scopes):
        if not scope:
            raise ModelError(f"factor {i} has an empty scope")
        if scope[-1] in family:
            raise ModelError(f"variable {scope[-1]} is the child of two factors")
        family[scope[-1]] = i

    g = nx.DiGraph()
    g.add_nodes_from(range(bn.n_vars))
    g.add_edges_from((p, child) for child, i in family.items() for p in bn.scopes[i][:-1])
    if not nx.is_directed_acyclic_graph(g):
        raise ModelError("factor scopes define a directed cycle")

    rng = np.random.default_rng(seed)
    leaves = sorted(v for v in g.nodes if g.out_degree(v) == 0)
    inner = sorted(v for v in g.nodes if g.out_degree(v) > 0)
    renumber = {v: k for k, v in enumerate(inner)}
    cards = bn.cardinalities

    utilities = []
    for leaf in leaves:
        scope = bn.scopes[family[leaf]]
        rows = _cpt_rows(bn.tables[family[leaf]], [cards[v] for v in scope], leaf)
        state = int(rng.integers(cards[leaf]))
        new_scope = [renumber[v] for v in scope[:-1]]
        utilities.append(DiscreteFactor.from_values(new_scope, [cards[v] for v in scope[:-1]], rows[..., state]))

    n_decisions = 0
    if decision_fraction > 0 and inner:
        n_decisions = max(1, int(round(decision_fraction * len(inner))))
    decisions = set(int(v) for v in rng.choice(inner, size=n_decisions, replace=False)) if n_decisions else set()

    variables, cpts = [], {}
    for v in inner:
        scope = bn.scopes[family[v]]
        parents = tuple(renumber[p] for p in scope[:-1])
        kind = "decision" if v in decisions else "chance"
        variables.append(Variable(id=renumber[v], cardinality=cards[v], kind=kind, parents=parents))
        if kind == "chance":
            rows = _cpt_rows(bn.tables[family[v]], [cards[u] for u in scope], v)
            cpts[renumber[v]] = DiscreteFactor.from_values(parents + (renumber[v],), [cards[u] for u in scope], rows)
    logger.debug("bn_to_id: %d utilities, %d decisions, %d chance", len(utilities), len(decisions), len(cpts))
    return InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode=mode)
