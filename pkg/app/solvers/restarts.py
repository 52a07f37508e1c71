"""Algorithm registry and the best-of-restarts driver."""
import logging
from typing import Dict

import numpy as np

from ..meubp import random_messages
from ..models import AlgorithmSpec, InfluenceDiagram, SolveResult, Strategy
from .base import Solver, prepare
from .bp import AnnealSolver, BpZeroSolver, PerturbedAnnealSolver
from .prox import ProxSolver
from .spu import SpuSolver

logger = logging.getLogger(__name__)

SOLVERS: Dict[str, Solver] = {
    "spu": SpuSolver(),
    "bp0": BpZeroSolver(),
    "anneal": AnnealSolver(),
    "anneal-perturbed": PerturbedAnnealSolver(),
    "prox": ProxSolver(),
}

# variants whose random restarts perturb the initial policy rather than the messages
POLICY_INIT = {"spu", "prox"}


def run_with_restarts(diagram: InfluenceDiagram, spec: AlgorithmSpec) -> SolveResult:
    """Run `spec` once per seed; restart 0 starts uniform (or at spec.init_strategy)."""
    solver = SOLVERS[spec.variant]
    model, jg = prepare(diagram, spec.junction)
    best: SolveResult | None = None
    traces = []
    for index, seed in enumerate(spec.seed_list()):
        rng = np.random.default_rng(seed)
        init_strategy, init_messages = None, None
        if index == 0:
            init_strategy = spec.init_strategy
        elif spec.variant in POLICY_INIT:
            init_strategy = Strategy.random(diagram, rng)
        else:
            init_messages = random_messages(jg, rng)
        result = solver.solve(
            diagram,
            spec=spec,
            seed=seed,
            model=model,
            jg=jg,
            init_strategy=init_strategy,
            init_messages=init_messages,
        )
        traces.append(result.trace)
        logger.info("%s/%s restart %d (seed %d): EU %.6g", spec.label, spec.junction, index, seed, result.eu)
        if best is None or result.eu > best.eu:
            best = result.model_copy(update={"restart_index": index, "algorithm": spec.label})
    return best.model_copy(update={"restart_traces": traces})
