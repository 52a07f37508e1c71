"""Single policy updates: coordinate ascent over decisions, one at a time."""
import logging
import time
from typing import Optional

import numpy as np

from ..evaluate import log_expected_utility, round_strategy
from ..factors import DiscreteFactor
from ..juncgraph import JunctionGraph
from ..meubp import policy_marginals, strategy_change
from ..models import AlgorithmSpec, AugmentedModel, InfluenceDiagram, SolveResult, Strategy, TraceRow
from .base import BestStrategy, Solver, prepare

logger = logging.getLogger(__name__)

# relative log gap under which two choices count as tied
SWITCH_TOL = 1e-12


def _best_choices(marg: np.ndarray, current: Optional[np.ndarray]) -> np.ndarray:
    """Lowest tied-best state per row; a row whose current choice is already tied-best keeps it."""
    top = np.max(marg, axis=-1)
    floor = top - SWITCH_TOL * np.maximum(1.0, np.abs(np.where(np.isfinite(top), top, 0.0)))
    pick = np.argmax(marg >= floor[..., None], axis=-1)
    if current is None:
        return pick
    kept = np.take_along_axis(marg, current[..., None], axis=-1)[..., 0]
    return np.where(kept >= floor, current, pick)


def _indicator(diagram: InfluenceDiagram, d: int, choice: np.ndarray) -> DiscreteFactor:
    cards = diagram.fam_cards(d)
    table = np.full(cards, -np.inf)
    np.put_along_axis(table, np.asarray(choice)[..., None], 0.0, axis=-1)
    return DiscreteFactor(diagram.fam(d), cards, table)


def _is_deterministic(f: DiscreteFactor) -> bool:
    return bool(np.all(np.max(f.log_values, axis=-1) > -1e-12))


def run_spu(
    diagram: InfluenceDiagram,
    jg: JunctionGraph | None = None,
    init: Strategy | None = None,
    sweeps: int = 100,
    *,
    model: AugmentedModel | None = None,
    seed: int = 0,
) -> SolveResult:
    if jg is None or model is None:
        model, jg = prepare(diagram, "tree" if jg is None else jg.kind)
    strategy = init if init is not None else Strategy.uniform(diagram)
    tracker = BestStrategy()
    rows = []
    started = time.perf_counter()
    converged = False
    for t in range(1, sweeps + 1):
        before = strategy
        changed = False
        for d in diagram.decision_ids:
            marg = policy_marginals(jg, model, strategy, d).log_values
            current = strategy.choices(d) if _is_deterministic(strategy.policies[d]) else None
            choice = _best_choices(marg, current)
            if current is None or (choice != current).any():
                changed = True
                policies = dict(strategy.policies)
                policies[d] = _indicator(diagram, d, choice)
                strategy = Strategy(policies=policies)
        log_eu = log_expected_utility(diagram, strategy)
        tracker.offer(t, strategy, log_eu)
        rows.append(
            TraceRow(
                algorithm="spu",
                junction=jg.kind,
                seed=seed,
                iter=t,
                temp_or_w=0.0,
                rounded_eu=float(np.exp(log_expected_utility(diagram, round_strategy(strategy)))),
                soft_eu=float(np.exp(log_eu)),
                residual=strategy_change(strategy, before),
                ms=(time.perf_counter() - started) * 1000.0,
            )
        )
        if not changed:
            converged = True
            break
    logger.debug("spu finished after %d sweeps (converged=%s)", len(rows), converged)
    return tracker.result(diagram, algorithm="spu", junction=jg.kind, trace=rows, seed=seed, converged=converged)


class SpuSolver(Solver):
    label = "spu"

    def solve(self, diagram, *, spec: AlgorithmSpec, seed, model, jg, init_strategy=None, init_messages=None) -> SolveResult:
        return run_spu(diagram, jg, init_strategy, sweeps=spec.max_iters, model=model, seed=seed)
