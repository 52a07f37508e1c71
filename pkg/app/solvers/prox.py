"""Proximal point updates on the decision policies.

Each outer step maximizes the MEU dual minus w^t times the summed
conditional KL to the current strategy tau^t. Folding the KL term into the
model gives theta^t = theta + w^t sum_i log tau^t_i at temperature eps = w^t,
so w = 1 is a plain marginalization and smaller weights run MEU-BP.
"""
import logging
import time

import numpy as np
from scipy.special import logsumexp

from ..errors import DegenerateSliceError
from ..evaluate import log_expected_utility, round_strategy
from ..factors import DiscreteFactor, marginal
from ..juncgraph import JunctionGraph
from ..meubp import MessageSet, extract_strategy, place_policies, run_bp, strategy_change, sum_inference
from ..models import AlgorithmSpec, AugmentedModel, BpOptions, InfluenceDiagram, SolveResult, Strategy, TraceRow
from .base import BestStrategy, Solver, prepare

logger = logging.getLogger(__name__)


def _conditional(b: DiscreteFactor, fam, fallback: DiscreteFactor) -> DiscreteFactor:
    local = marginal(b, fam).transpose(fam).log_values
    with np.errstate(divide="ignore"):
        norm = logsumexp(local, axis=-1, keepdims=True)
    dead = np.isneginf(norm)
    table = np.where(dead, fallback.log_values, local - np.where(dead, 0.0, norm))
    return DiscreteFactor(fam, fallback.cards, table)


def prox_one_step(jg: JunctionGraph, model: AugmentedModel, tau: Strategy) -> Strategy:
    """tau_i <- tau_i * E(u | x_fam(i); tau_{-i}), renormalized per row, for every i at once."""
    engine = sum_inference(jg, model, place_policies(jg, tau))
    policies = {}
    for d, k in jg.decision_clusters.items():
        fam = tuple(jg.decisions[d]) + (d,)
        policies[d] = _conditional(engine.incoming(k), fam, tau.policies[d])
    return Strategy(policies=policies)


def prox_weighted_step(
    jg: JunctionGraph,
    model: AugmentedModel,
    tau: Strategy,
    w: float,
    options: BpOptions,
    messages: MessageSet | None,
) -> tuple[Strategy, MessageSet]:
    extra = {}
    for d, f in tau.policies.items():
        extra.setdefault(jg.decision_clusters[d], []).append(DiscreteFactor(f.scope, f.cards, w * f.log_values))
    inner = options.model_copy(update={"schedule": "fixed", "epsilon": w})
    beliefs, messages, _ = run_bp(jg, model, inner, messages, extra=extra, trace=False)
    return extract_strategy(beliefs, jg, inner.tie_tol, on_degenerate="uniform"), messages


def run_prox_bp(
    diagram: InfluenceDiagram,
    jg: JunctionGraph | None = None,
    weights: str = "one",
    options: BpOptions | None = None,
    *,
    model: AugmentedModel | None = None,
    init: Strategy | None = None,
    inner_iters: int | None = None,
    seed: int = 0,
) -> SolveResult:
    if jg is None or model is None:
        model, jg = prepare(diagram, "tree" if jg is None else jg.kind)
    label = f"prox-{weights}"
    options = options or BpOptions(label=label, seed=seed)
    inner = options.model_copy(update={"max_iters": inner_iters or AlgorithmSpec().inner_iters})
    tau = init if init is not None else Strategy.uniform(diagram)
    for d, f in tau.policies.items():
        if np.isneginf(f.log_values).any():
            logger.warning("initial policy of decision %d has zero entries; those states stay excluded", d)

    tracker = BestStrategy()
    rows = []
    messages = None
    converged = False
    started = time.perf_counter()
    for t in range(1, options.max_iters + 1):
        w = 1.0 if weights == "one" else 1.0 / t
        try:
            if weights == "one":
                new = prox_one_step(jg, model, tau)
            else:
                new, messages = prox_weighted_step(jg, model, tau, w, inner, messages)
        except DegenerateSliceError:
            logger.warning("%s: strategy row collapsed at outer step %d; a restart is advised", label, t)
            break
        change = strategy_change(new, tau)
        tau = new
        rounded = round_strategy(tau)
        rounded_log_eu = log_expected_utility(diagram, rounded)
        tracker.offer(t, rounded, rounded_log_eu)
        rows.append(
            TraceRow(
                algorithm=label,
                junction=jg.kind,
                seed=seed,
                iter=t,
                temp_or_w=w,
                rounded_eu=float(np.exp(rounded_log_eu)),
                soft_eu=float(np.exp(log_expected_utility(diagram, tau))),
                residual=change,
                ms=(time.perf_counter() - started) * 1000.0,
            )
        )
        if change < options.tol:
            converged = True
            break
    logger.debug("%s finished after %d outer steps", label, len(rows))
    return tracker.result(diagram, algorithm=label, junction=jg.kind, trace=rows, seed=seed, converged=converged)


class ProxSolver(Solver):
    label = "prox"

    def solve(self, diagram, *, spec: AlgorithmSpec, seed, model, jg, init_strategy=None, init_messages=None) -> SolveResult:
        options = BpOptions(damping=spec.damping, tol=spec.tol, max_iters=spec.max_iters, seed=seed, label=spec.label)
        return run_prox_bp(diagram, jg, spec.weights, options, model=model, init=init_strategy, inner_iters=spec.inner_iters, seed=seed)
