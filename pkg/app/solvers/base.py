from typing import List, Optional, Tuple

import numpy as np

from ..errors import ResourceCapError
from ..evaluate import build_augmented_model, log_expected_utility, round_strategy
from ..juncgraph import JunctionGraph, build_junction_tree, build_loopy_junction_graph
from ..meubp import MessageSet
from ..models import ELIMINATION_CAP, AlgorithmSpec, AugmentedModel, InfluenceDiagram, SolveResult, Strategy, TraceRow


def prepare(diagram: InfluenceDiagram, junction: str = "tree", cap: float = ELIMINATION_CAP) -> Tuple[AugmentedModel, JunctionGraph]:
    """Augmented model plus the requested junction graph; clusters above `cap` entries are refused."""
    model = build_augmented_model(diagram)
    jg = build_loopy_junction_graph(model) if junction == "loopy" else build_junction_tree(model)
    largest = max(float(np.prod([jg.cards[v] for v in c.scope], dtype=float)) for c in jg.clusters)
    if largest > cap:
        raise ResourceCapError(f"{junction} cluster table", largest, cap)
    return model, jg


class BestStrategy:
    """Running best deterministic strategy by rounded log EU; earlier wins ties."""

    def __init__(self):
        self.strategy: Optional[Strategy] = None
        self.log_eu = -np.inf
        self.iteration = 0

    def offer(self, t: int, strategy: Strategy, log_eu: float) -> None:
        if self.strategy is None or log_eu > self.log_eu:
            self.strategy, self.log_eu, self.iteration = strategy, log_eu, t

    def result(self, diagram: InfluenceDiagram, *, algorithm: str, junction: str, trace: List[TraceRow], seed: int, converged: bool) -> SolveResult:
        strategy = round_strategy(self.strategy if self.strategy is not None else Strategy.uniform(diagram))
        log_eu = log_expected_utility(diagram, strategy)
        return SolveResult(
            algorithm=algorithm,
            junction=junction,
            strategy=strategy,
            eu=float(np.exp(log_eu)),
            log_eu=log_eu,
            trace=trace,
            iterations=len(trace),
            final_residual=trace[-1].residual if trace else 0.0,
            converged=converged,
            seed=seed,
        )


class Solver:
    label: str = "solver"

    def solve(
        self,
        diagram: InfluenceDiagram,
        *,
        spec: AlgorithmSpec,
        seed: int,
        model: AugmentedModel,
        jg: JunctionGraph,
        init_strategy: Strategy | None = None,
        init_messages: MessageSet | None = None,
    ) -> SolveResult:
        raise NotImplementedError
