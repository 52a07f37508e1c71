"""Junction trees and loopy junction graphs over an augmented model."""
import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import networkx as nx
from pydantic import BaseModel, Field

from .errors import StructureError
from .exact import check_perfect_recall
from .factors import eliminate_vertex, interaction_graph, min_fill_order
from .models import AugmentedModel

logger = logging.getLogger(__name__)


class Cluster(BaseModel):
    id: int
    scope: Tuple[int, ...]
    factors: Tuple[int, ...] = ()
    decision: Optional[int] = None


class Edge(BaseModel):
    a: int
    b: int
    separator: Tuple[int, ...]


class JunctionGraph(BaseModel):
    clusters: List[Cluster]
    edges: List[Edge] = Field(default_factory=list)
    is_tree: bool = True
    kind: Literal["tree", "loopy"] = "tree"
    cards: Dict[int, int] = Field(default_factory=dict)
    decisions: Dict[int, Tuple[int, ...]] = Field(default_factory=dict)
    decision_clusters: Dict[int, int] = Field(default_factory=dict)

    def neighbors(self) -> Dict[int, List[Tuple[int, Tuple[int, ...]]]]:
        nbrs: Dict[int, List[Tuple[int, Tuple[int, ...]]]] = {c.id: [] for c in self.clusters}
        for e in self.edges:
            nbrs[e.a].append((e.b, e.separator))
            nbrs[e.b].append((e.a, e.separator))
        return nbrs

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(c.id for c in self.clusters)
        for e in self.edges:
            g.add_edge(e.a, e.b, separator=e.separator)
        return g


class ConsistencyCertificate(BaseModel):
    root: int
    parent: Dict[int, Optional[int]]
    consistent: List[int]


def _smallest_containing(clusters: Sequence[Cluster], scope: Sequence[int]) -> Optional[Cluster]:
    needed = set(scope)
    hits = [c for c in clusters if needed <= set(c.scope)]
    return min(hits, key=lambda c: (len(c.scope), c.id)) if hits else None


def _assign_factors(clusters: List[Cluster], model: AugmentedModel) -> List[Cluster]:
    owned: Dict[int, List[int]] = {c.id: [] for c in clusters}
    for i, f in enumerate(model.factors):
        home = _smallest_containing(clusters, f.scope)
        if home is None:
            raise StructureError(f"no cluster covers factor {i} with scope {f.scope}")
        owned[home.id].append(i)
    return [c.model_copy(update={"factors": tuple(owned[c.id])}) for c in clusters]


def default_elimination_order(model: AugmentedModel, decisions: Dict[int, Tuple[int, ...]], adj: Dict[int, set]) -> List[int]:
    """Reverse temporal blocks with min-fill inside each block under perfect recall, plain min-fill otherwise."""
    adj = {v: set(n) for v, n in adj.items()}
    order = check_perfect_recall(model.diagram) if decisions == model.decisions else None
    if order is None:
        return min_fill_order(adj, model.cards)
    blocks = order.blocks()
    if model.selector_id is not None:
        blocks[-1] = ("sum", blocks[-1][1] + [model.selector_id])
    out: List[int] = []
    for mode, block in reversed(blocks):
        if mode == "max":
            eliminate_vertex(adj, block[0])
            out.extend(block)
        else:
            out.extend(min_fill_order(adj, model.cards, candidates=block))
    return out


def build_junction_tree(
    model: AugmentedModel,
    decisions: Optional[Dict[int, Tuple[int, ...]]] = None,
    elim_order: Optional[Sequence[int]] = None,
) -> JunctionGraph:
    """Clique tree from triangulation with each fam(d) seeded as a clique.

    The tree is the elimination tree of the triangulation (a maximum-weight
    spanning tree of the cluster intersection graph). Clique fam(d) created by
    eliminating decision d is kept even when it is not maximal.
    """
    decisions = dict(model.decisions if decisions is None else decisions)
    variables = model.variables
    seeds = [f.scope for f in model.factors] + [p + (d,) for d, p in decisions.items()]
    adj = interaction_graph(seeds, variables)
    if elim_order is None:
        elim_order = default_elimination_order(model, decisions, adj)
    elim_order = [int(v) for v in elim_order]
    if sorted(elim_order) != variables:
        raise StructureError("elimination order is not a permutation of the model variables")

    pos = {v: i for i, v in enumerate(elim_order)}
    cliques: Dict[int, frozenset] = {}
    work = {v: set(n) for v, n in adj.items()}
    for v in elim_order:
        cliques[v] = frozenset(eliminate_vertex(work, v) | {v})
    parent: Dict[int, Optional[int]] = {}
    children: Dict[int, List[int]] = {v: [] for v in elim_order}
    for v in elim_order:
        rest = cliques[v] - {v}
        parent[v] = min(rest, key=pos.get) if rest else None
        if parent[v] is not None:
            children[parent[v]].append(v)

    fam_sets = {d: frozenset(p + (d,)) for d, p in decisions.items()}
    for v in reversed(elim_order):
        if v in fam_sets and cliques[v] == fam_sets[v]:
            continue
        absorb = [w for w in children[v] if cliques[v] < cliques[w]]
        if not absorb:
            continue
        w = min(absorb, key=pos.get)
        up = parent[v]
        parent[w] = up
        if up is not None:
            children[up] = [w if c == v else c for c in children[up]]
        for c in children[v]:
            if c != w:
                parent[c] = w
                children[w].append(c)
        children[w] = [c for c in children[w] if c != v]
        del parent[v], children[v]

    kept = [v for v in reversed(elim_order) if v in parent]
    ids = {v: k for k, v in enumerate(kept)}
    clusters = [Cluster(id=ids[v], scope=tuple(sorted(cliques[v]))) for v in kept]
    edges = [Edge(a=ids[parent[v]], b=ids[v], separator=tuple(sorted(cliques[v] & cliques[parent[v]]))) for v in kept if parent[v] is not None]
    roots = [ids[v] for v in kept if parent[v] is None]
    edges.extend(Edge(a=r0, b=r1, separator=()) for r0, r1 in zip(roots, roots[1:]))

    for d in sorted(decisions):
        fam = tuple(sorted(fam_sets[d]))
        if any(c.scope == fam for c in clusters):
            continue
        host = _smallest_containing(clusters, fam)
        leaf = Cluster(id=len(clusters), scope=fam)
        clusters.append(leaf)
        edges.append(Edge(a=host.id, b=leaf.id, separator=fam))

    jg = JunctionGraph(
        clusters=_assign_factors(clusters, model),
        edges=edges,
        is_tree=True,
        kind="tree",
        cards=dict(model.cards),
        decisions=decisions,
    )
    logger.debug("junction tree: %d clusters, max scope %d", len(clusters), max(len(c.scope) for c in clusters))
    return assign_decision_clusters(jg, decisions)


def build_loopy_junction_graph(
    model: AugmentedModel,
    decisions: Optional[Dict[int, Tuple[int, ...]]] = None,
) -> JunctionGraph:
    """Factor-graph-shaped join graph: factor and fam(d) clusters linked to per-variable singletons."""
    decisions = dict(model.decisions if decisions is None else decisions)
    index: Dict[Tuple[int, ...], int] = {}
    scopes: List[Tuple[int, ...]] = []

    def cluster_for(scope: Tuple[int, ...]) -> int:
        if scope not in index:
            index[scope] = len(scopes)
            scopes.append(scope)
        return index[scope]

    for f in model.factors:
        if f.scope:
            cluster_for(tuple(sorted(f.scope)))
    for d in sorted(decisions):
        cluster_for(tuple(sorted(decisions[d] + (d,))))
    singleton = {v: cluster_for((v,)) for v in model.variables}

    clusters = [Cluster(id=k, scope=s) for k, s in enumerate(scopes)]
    edges = [
        Edge(a=k, b=singleton[v], separator=(v,))
        for k, s in enumerate(scopes)
        if len(s) > 1
        for v in s
    ]
    jg = JunctionGraph(
        clusters=_assign_factors(clusters, model),
        edges=edges,
        kind="loopy",
        cards=dict(model.cards),
        decisions=decisions,
    )
    jg = jg.model_copy(update={"is_tree": nx.is_tree(jg.graph())})
    return assign_decision_clusters(jg, decisions)


def verify_running_intersection(jg: JunctionGraph) -> bool:
    scopes = {c.id: set(c.scope) for c in jg.clusters}
    for e in jg.edges:
        if not set(e.separator) <= scopes[e.a] & scopes[e.b]:
            return False
    for v in set().union(*scopes.values()) if scopes else ():
        sub = nx.Graph()
        sub.add_nodes_from(k for k, s in scopes.items() if v in s)
        sub.add_edges_from((e.a, e.b) for e in jg.edges if v in e.separator)
        if sub.number_of_edges() != sub.number_of_nodes() - 1 or not nx.is_connected(sub):
            return False
    return True


def find_consistency_certificate(jg: JunctionGraph, decisions: Optional[Dict[int, Tuple[int, ...]]] = None) -> ConsistencyCertificate:
    """Root choice maximizing the decisions d with s(k, parent(k)) inside pa(d)."""
    if not jg.is_tree:
        raise StructureError("consistency certificates need a junction tree")
    decisions = jg.decisions if decisions is None else decisions
    g = jg.graph()
    best: Optional[ConsistencyCertificate] = None
    for root in sorted(g.nodes):
        parent: Dict[int, Optional[int]] = {root: None}
        parent.update({child: up for up, child in nx.bfs_edges(g, root)})
        consistent = []
        for d in sorted(decisions):
            k = jg.decision_clusters.get(d)
            if k is None:
                continue
            up = parent[k]
            if up is None or set(g.edges[k, up]["separator"]) <= set(decisions[d]):
                consistent.append(d)
        if best is None or len(consistent) > len(best.consistent):
            best = ConsistencyCertificate(root=root, parent=parent, consistent=consistent)
    return best


def assign_decision_clusters(jg: JunctionGraph, decisions: Optional[Dict[int, Tuple[int, ...]]] = None) -> JunctionGraph:
    decisions = jg.decisions if decisions is None else decisions
    mapping: Dict[int, int] = {}
    taken: Dict[int, int] = {}
    for d in sorted(decisions):
        home = _smallest_containing(jg.clusters, decisions[d] + (d,))
        if home is None:
            raise StructureError(f"no cluster contains fam({d})")
        if home.id in taken:
            raise StructureError(f"decisions {taken[home.id]} and {d} both need cluster {home.id}")
        taken[home.id] = d
        mapping[d] = home.id
    clusters = [c.model_copy(update={"decision": taken.get(c.id)}) for c in jg.clusters]
    return jg.model_copy(update={"clusters": clusters, "decision_clusters": mapping, "decisions": dict(decisions)})


def dump_junction_graph(jg: JunctionGraph) -> str:
    lines = [f"{jg.kind} clusters={len(jg.clusters)} edges={len(jg.edges)} tree={str(jg.is_tree).lower()}"]
    for c in jg.clusters:
        line = f"cluster {c.id} scope {' '.join(map(str, c.scope))} factors {' '.join(map(str, c.factors))}".rstrip()
        if c.decision is not None:
            line += f" decision {c.decision}"
        lines.append(line)
    for e in jg.edges:
        lines.append(f"edge {e.a} {e.b} sep {' '.join(map(str, e.separator))}".rstrip())
    return "\n".join(lines) + "\n"
