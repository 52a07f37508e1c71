"""Random LIMIDs, sensor-network diagrams and the two-decision toy diagrams."""
import itertools
import logging
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from ..errors import ModelError
from ..factors import DiscreteFactor, interaction_graph, marginal, min_fill_order
from ..models import JOINT_TABLE_CAP, InfluenceDiagram, RandomIdConfig, SensorNetConfig, Variable

logger = logging.getLogger(__name__)

# Dirichlet draws can underflow to exact zeros for small alpha
MIN_PROB = 1e-300


# ---------------------------------------------------------------------
# TOY DIAGRAMS
# ---------------------------------------------------------------------
def _toy_utility() -> DiscreteFactor:
    return DiscreteFactor.from_values((0, 1), (2, 2), [[1.0, 0.1], [0.1, 2.0]])


def copy_pair() -> InfluenceDiagram:
    """d1 -> d2, d2 observes d1; u(0,0)=1, u(1,1)=2, mismatches 0.1."""
    variables = [
        Variable(id=0, cardinality=2, kind="decision", name="d1"),
        Variable(id=1, cardinality=2, kind="decision", parents=(0,), name="d2"),
    ]
    return InfluenceDiagram(variables=variables, utilities=[_toy_utility()], utility_mode="multiplicative")


def blind_pair() -> InfluenceDiagram:
    """Same utility as copy_pair but neither decision observes the other."""
    variables = [
        Variable(id=0, cardinality=2, kind="decision", name="d1"),
        Variable(id=1, cardinality=2, kind="decision", name="d2"),
    ]
    return InfluenceDiagram(variables=variables, utilities=[_toy_utility()], utility_mode="multiplicative")


# ---------------------------------------------------------------------
# RANDOM DIAGRAMS
# ---------------------------------------------------------------------
def _dirichlet_rows(rng: np.random.Generator, alpha: float, rows: int, card: int) -> np.ndarray:
    table = rng.dirichlet(np.full(card, alpha), size=rows)
    table = np.maximum(table, MIN_PROB)
    return table / table.sum(axis=-1, keepdims=True)


def gen_random_id(cfg: RandomIdConfig) -> InfluenceDiagram:
    """Random DAG in a uniform order; leaves become Gamma utilities over their parents."""
    rng = np.random.default_rng(cfg.seed)
    n, card = cfg.n_vars, cfg.cardinality
    parents: List[List[int]] = []
    for i in range(n):
        k = int(rng.integers(0, min(cfg.max_parents, i) + 1))
        parents.append(sorted(int(p) for p in rng.choice(i, size=k, replace=False)) if k else [])
    has_child = {p for pa in parents for p in pa}
    leaves = [i for i in range(n) if i not in has_child]
    inner = [i for i in range(n) if i in has_child]

    n_decisions = 0
    if cfg.decision_fraction > 0:
        if not inner:
            raise ModelError("random DAG has no non-leaf node to turn into a decision")
        n_decisions = max(1, int(round(cfg.decision_fraction * len(inner))))
        if n_decisions >= len(inner):
            raise ModelError(f"decision fraction {cfg.decision_fraction} leaves no chance node among {len(inner)}")
    decisions = sorted(int(d) for d in rng.choice(inner, size=n_decisions, replace=False)) if n_decisions else []

    if cfg.no_forgetting:
        seen: List[int] = []
        for d in decisions:
            parents[d] = sorted(set(parents[d]) | set(seen))
            seen = sorted(set(parents[d]) | {d})

    renumber = {v: k for k, v in enumerate(inner)}
    variables, cpts = [], {}
    for v in inner:
        pa = tuple(renumber[p] for p in parents[v])
        kind = "decision" if v in decisions else "chance"
        variables.append(Variable(id=renumber[v], cardinality=card, kind=kind, parents=pa))
        if kind == "chance":
            rows = _dirichlet_rows(rng, cfg.dirichlet_alpha, card ** len(pa), card)
            cpts[renumber[v]] = DiscreteFactor.from_values(pa + (renumber[v],), (card,) * (len(pa) + 1), rows.reshape((card,) * (len(pa) + 1)))
    utilities = []
    for leaf in leaves:
        scope = tuple(renumber[p] for p in parents[leaf])
        values = rng.gamma(cfg.gamma_alpha, 1.0, size=(card,) * len(scope))
        utilities.append(DiscreteFactor.from_values(scope, (card,) * len(scope), np.maximum(values, MIN_PROB)))
    logger.debug("random ID seed=%d: %d vars, %d decisions, %d utilities", cfg.seed, len(variables), len(decisions), len(utilities))
    return InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode=cfg.utility_mode)


# ---------------------------------------------------------------------
# SENSOR NETWORKS
# ---------------------------------------------------------------------
def sensor_topology(cfg: SensorNetConfig) -> Tuple[nx.Graph, List[Tuple[int, int]]]:
    """MRF graph and the directed signal path (boustrophedon on grids, id order otherwise)."""
    if cfg.topology == "grid":
        w, h = cfg.width, cfg.height
        g = nx.Graph()
        g.add_nodes_from(range(w * h))
        for r, c in itertools.product(range(h), range(w)):
            if c + 1 < w:
                g.add_edge(r * w + c, r * w + c + 1)
            if r + 1 < h:
                g.add_edge(r * w + c, (r + 1) * w + c)
        path = [r * w + (c if r % 2 == 0 else w - 1 - c) for r in range(h) for c in range(w)]
    else:
        g = nx.gnm_random_graph(cfg.n_nodes, cfg.n_edges, seed=cfg.seed)
        path = list(range(cfg.n_nodes))
    signals = cfg.signal_edges if cfg.signal_edges is not None else list(zip(path, path[1:]))
    return g, [(int(a), int(b)) for a, b in signals]


def _hidden_chain(g: nx.Graph, coupling: float) -> Tuple[Dict[int, Tuple[int, ...]], Dict[int, DiscreteFactor]]:
    """Directed form of the pairwise MRF: parents from a min-fill triangulation, CPTs from the exact joint."""
    n = g.number_of_nodes()
    if 2.0 ** n > JOINT_TABLE_CAP:
        raise ModelError(f"hidden field with {n} nodes exceeds the joint table cap")
    cards = {v: 2 for v in g.nodes}
    scope = list(range(n))
    log_joint = np.zeros((2,) * n)
    same = np.array([[coupling, 0.0], [0.0, coupling]])
    for a, b in g.edges:
        shape = [1] * n
        shape[a], shape[b] = 2, 2
        log_joint = log_joint + same.reshape(shape)
    joint = DiscreteFactor(scope, (2,) * n, log_joint).normalize()

    adj = interaction_graph([e for e in g.edges], g.nodes)
    order = min_fill_order({v: set(nb) for v, nb in adj.items()}, cards)
    work = {v: set(nb) for v, nb in adj.items()}
    parents: Dict[int, Tuple[int, ...]] = {}
    for v in order:
        nbrs = work.pop(v)
        for a in nbrs:
            work[a].discard(v)
            work[a].update(nbrs - {a})
        parents[v] = tuple(sorted(nbrs))
    cpts = {}
    for v in scope:
        fam = parents[v] + (v,)
        local = marginal(joint, fam).transpose(fam)
        cond = local.log_values - marginal(local, parents[v]).aligned(fam, local.cards) if parents[v] else local.log_values
        cpts[v] = DiscreteFactor.from_values(fam, local.cards, np.exp(cond) / np.exp(cond).sum(axis=-1, keepdims=True))
    return parents, cpts


def gen_sensor_id(cfg: SensorNetConfig) -> InfluenceDiagram:
    """Hidden binary field h, noisy readings v, 1-bit signals s along a path, predictions d.

    Ids: h_i = i, v_i = n + i, signals next in path order, then d_i.
    Utilities (additive): reward when d_i == h_i (else 1); 1 + cost when a signal stays silent (else 1),
    so every transmitted bit gives up `cost` of utility.
    """
    g, signals = sensor_topology(cfg)
    n = g.number_of_nodes()
    sg = nx.DiGraph(signals)
    if not nx.is_directed_acyclic_graph(sg):
        raise ModelError("signal paths contain a cycle")
    if any(not (0 <= a < n and 0 <= b < n) for a, b in signals):
        raise ModelError("signal edge references an unknown sensor")
    accurate = set(cfg.accurate) if cfg.accurate is not None else {i for i in range(n) if i % 2 == 0}

    hidden_parents, hidden_cpts = _hidden_chain(g, cfg.coupling)
    variables = [Variable(id=i, cardinality=2, parents=hidden_parents[i], name=f"h{i}") for i in range(n)]
    cpts: Dict[int, DiscreteFactor] = dict(hidden_cpts)
    for i in range(n):
        acc = cfg.accurate_prob if i in accurate else cfg.noisy_prob
        v = n + i
        variables.append(Variable(id=v, cardinality=2, parents=(i,), name=f"v{i}"))
        cpts[v] = DiscreteFactor.from_values((i, v), (2, 2), [[acc, 1.0 - acc], [1.0 - acc, acc]])

    rank = {v: k for k, v in enumerate(nx.topological_sort(sg))}
    ordered = sorted(signals, key=lambda e: (rank[e[0]], e[1]))
    signal_id = {e: 2 * n + k for k, e in enumerate(ordered)}
    incoming: Dict[int, List[int]] = {i: [] for i in range(n)}
    for (a, b), sid in signal_id.items():
        incoming[b].append(sid)
    for (a, b), sid in signal_id.items():
        variables.append(Variable(id=sid, cardinality=2, kind="decision", parents=tuple([n + a] + incoming[a]), name=f"s{a}_{b}"))
    first_d = 2 * n + len(signal_id)
    for i in range(n):
        variables.append(Variable(id=first_d + i, cardinality=2, kind="decision", parents=tuple([n + i] + incoming[i]), name=f"d{i}"))

    utilities = []
    for i in range(n):
        d = first_d + i
        utilities.append(DiscreteFactor.from_values((d, i), (2, 2), [[cfg.reward, 1.0], [1.0, cfg.reward]]))
    for sid in signal_id.values():
        utilities.append(DiscreteFactor.from_values((sid,), (2,), [1.0 + cfg.cost, 1.0]))
    return InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode="additive")


def signals_sent(diagram: InfluenceDiagram, strategy) -> int:
    """Number of (signal, observation row) pairs that choose to transmit."""
    total = 0
    for v in diagram.variables:
        if v.kind == "decision" and (v.name or "").startswith("s"):
            total += int(np.count_nonzero(strategy.choices(v.id) == 1))
    return total
