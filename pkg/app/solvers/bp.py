"""Zero-temperature and annealed MEU belief propagation."""
import logging
from typing import List

import numpy as np

from ..factors import DiscreteFactor
from ..juncgraph import JunctionGraph
from ..meubp import MessageSet, MeuBeliefPropagation, run_bp, strategy_messages
from ..models import AlgorithmSpec, AugmentedModel, BpOptions, InfluenceDiagram, SolveResult, Strategy
from .base import BestStrategy, Solver, prepare

logger = logging.getLogger(__name__)


def _options(spec: AlgorithmSpec | None, schedule: str, label: str, seed: int) -> BpOptions:
    spec = spec or AlgorithmSpec()
    return BpOptions(schedule=schedule, damping=spec.damping, tol=spec.tol, max_iters=spec.max_iters, seed=seed, label=label)


def _converged(trace, options: BpOptions) -> bool:
    return bool(trace) and (len(trace) < options.max_iters or trace[-1].residual < options.tol)


def run_bp_zero(
    diagram: InfluenceDiagram,
    jg: JunctionGraph | None = None,
    init_messages: MessageSet | None = None,
    options: BpOptions | None = None,
    *,
    model: AugmentedModel | None = None,
    init_strategy: Strategy | None = None,
) -> SolveResult:
    """MEU-BP in the eps -> 0 limit; best rounded strategy seen over the run."""
    if jg is None or model is None:
        model, jg = prepare(diagram, "tree" if jg is None else jg.kind)
    options = (options or _options(None, "zero", "bp0", 0)).model_copy(update={"schedule": "zero"})
    if init_messages is None and init_strategy is not None:
        init_messages = strategy_messages(jg, model, init_strategy)
    tracker = BestStrategy()
    _, _, trace = run_bp(jg, model, options, init_messages, observer=tracker.offer)
    return tracker.result(diagram, algorithm=options.label, junction=jg.kind, trace=trace, seed=options.seed or 0, converged=_converged(trace, options))


def perturbation_noise(model: AugmentedModel, rng: np.random.Generator) -> List[np.ndarray]:
    """One U(-1, 1) draw per entry of every model factor."""
    return [rng.uniform(-1.0, 1.0, size=f.cards) for f in model.factors]


def perturbation_scale(model: AugmentedModel, scale: float) -> float:
    finite = [np.abs(f.log_values[np.isfinite(f.log_values)]) for f in model.factors]
    peak = max((float(a.max()) for a in finite if a.size), default=0.0)
    return scale * peak


def perturbed_model(model: AugmentedModel, noise: List[np.ndarray], eta: float) -> AugmentedModel:
    factors = []
    for f, n in zip(model.factors, noise):
        table = np.where(np.isneginf(f.log_values), -np.inf, f.log_values + eta * n)
        factors.append(DiscreteFactor(f.scope, f.cards, table))
    return model.with_factors(factors)


def run_anneal_bp(
    diagram: InfluenceDiagram,
    jg: JunctionGraph | None = None,
    options: BpOptions | None = None,
    perturbed: bool = False,
    *,
    model: AugmentedModel | None = None,
    init_messages: MessageSet | None = None,
    scale: float | None = None,
    seed: int = 0,
) -> SolveResult:
    """MEU-BP with eps^t = 1/t, optionally on a model with decaying random log-noise."""
    if jg is None or model is None:
        model, jg = prepare(diagram, "tree" if jg is None else jg.kind)
    label = "anneal-perturbed" if perturbed else "anneal"
    options = (options or _options(None, "anneal", label, seed)).model_copy(update={"schedule": "anneal"})
    tracker = BestStrategy()
    eta0 = perturbation_scale(model, AlgorithmSpec().perturbation_scale if scale is None else scale) if perturbed else 0.0
    if eta0 <= 0.0:
        _, _, trace = run_bp(jg, model, options, init_messages, observer=tracker.offer)
        return tracker.result(diagram, algorithm=options.label, junction=jg.kind, trace=trace, seed=seed, converged=_converged(trace, options))

    noise = perturbation_noise(model, np.random.default_rng(seed))

    def perturb(t: int, engine: MeuBeliefPropagation) -> None:
        engine.set_potentials(perturbed_model(model, noise, eta0 / t))

    _, messages, trace = run_bp(jg, model, options, init_messages, hook=perturb, observer=tracker.offer)
    last = trace[-1].iter if trace else 0
    clean = options.model_copy(update={"max_iters": 1})
    _, _, tail = run_bp(jg, model, clean, messages, observer=tracker.offer, start_iter=last + 1)
    trace = trace + tail
    logger.debug("perturbed annealing: eta0=%.3g, %d sweeps", eta0, len(trace))
    return tracker.result(diagram, algorithm=options.label, junction=jg.kind, trace=trace, seed=seed, converged=_converged(trace[:-1], options))


class BpZeroSolver(Solver):
    label = "bp0"

    def solve(self, diagram, *, spec: AlgorithmSpec, seed, model, jg, init_strategy=None, init_messages=None) -> SolveResult:
        options = _options(spec, "zero", self.label, seed)
        return run_bp_zero(diagram, jg, init_messages, options, model=model, init_strategy=init_strategy)


class AnnealSolver(Solver):
    label = "anneal"
    perturbed = False

    def solve(self, diagram, *, spec: AlgorithmSpec, seed, model, jg, init_strategy=None, init_messages=None) -> SolveResult:
        if init_messages is None and init_strategy is not None:
            init_messages = strategy_messages(jg, model, init_strategy)
        options = _options(spec, "anneal", self.label, seed)
        return run_anneal_bp(
            diagram,
            jg,
            options,
            self.perturbed,
            model=model,
            init_messages=init_messages,
            scale=spec.perturbation_scale,
            seed=seed,
        )


class PerturbedAnnealSolver(AnnealSolver):
    label = "anneal-perturbed"
    perturbed = True
