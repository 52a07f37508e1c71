from typing import Any, Dict, List, Literal, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import logsumexp

from .errors import ModelError
from .factors import DiscreteFactor
from .params import section

_MODEL = section("model")
_LIMITS = section("limits")
_BP = section("bp")
_SOLVERS = section("solvers")
_RANDOM = section("random_id")
_SENSOR = section("sensor")

NORMALIZATION_TOL = float(_MODEL.get("normalization_tol", 1e-9))
UTILITY_FLOOR = float(_MODEL.get("utility_floor", 1e-12))
JOINT_TABLE_CAP = float(_LIMITS.get("joint_table_cap", 1e7))
STRATEGY_CAP = float(_LIMITS.get("strategy_cap", 1e6))
ELIMINATION_CAP = float(_LIMITS.get("elimination_cap", 1e7))

UtilityMode = Literal["additive", "multiplicative"]
VariableKind = Literal["chance", "decision"]


def _check_conditional(f: DiscreteFactor, what: str) -> None:
    """Rows over the last scope variable must sum to one."""
    if not f.scope:
        raise ModelError(f"{what} has an empty scope")
    with np.errstate(divide="ignore"):
        sums = np.exp(logsumexp(f.log_values, axis=-1))
    if np.abs(sums - 1.0).max(initial=0.0) > NORMALIZATION_TOL:
        raise ModelError(f"{what} rows are not normalized (worst row sum {sums.flat[np.abs(sums - 1).argmax()]:.12g})")


class Variable(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    cardinality: int = Field(ge=1)
    kind: VariableKind = "chance"
    parents: Tuple[int, ...] = ()
    name: Optional[str] = None

    @property
    def fam(self) -> Tuple[int, ...]:
        return self.parents + (self.id,)


class InfluenceDiagram(BaseModel):
    """DAG of chance/decision variables, one CPT per chance node, utility factors.

    CPT scopes are (*parents, child); utilities are clamped below at
    UTILITY_FLOOR times the largest utility entry.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    variables: List[Variable]
    cpts: Dict[int, DiscreteFactor] = Field(default_factory=dict)
    utilities: List[DiscreteFactor] = Field(default_factory=list)
    utility_mode: UtilityMode = "additive"

    @field_validator("utilities")
    @classmethod
    def clamp_utilities(cls, utilities: List[DiscreteFactor]) -> List[DiscreteFactor]:
        if not utilities:
            return utilities
        top = max(float(np.max(u.log_values)) if u.size else float("-inf") for u in utilities)
        if not np.isfinite(top):
            raise ModelError("all utility entries are zero")
        floor = top + np.log(UTILITY_FLOOR)
        return [u if np.all(u.log_values >= floor) else DiscreteFactor(u.scope, u.cards, np.maximum(u.log_values, floor)) for u in utilities]

    @model_validator(mode="after")
    def check_structure(self) -> "InfluenceDiagram":
        n = len(self.variables)
        for i, var in enumerate(self.variables):
            if var.id != i:
                raise ModelError(f"variable ids must be dense 0..{n - 1}; position {i} holds {var.id}")
            for p in var.parents:
                if not 0 <= p < n or p == i:
                    raise ModelError(f"variable {i} has invalid parent {p}")
            if len(set(var.parents)) != len(var.parents):
                raise ModelError(f"variable {i} lists a parent twice")
        if not nx.is_directed_acyclic_graph(self.graph()):
            raise ModelError("parent lists contain a directed cycle")
        cards = self.cards
        for var in self.variables:
            cpt = self.cpts.get(var.id)
            if var.kind == "decision":
                if cpt is not None:
                    raise ModelError(f"decision {var.id} carries a CPT")
                continue
            if cpt is None:
                raise ModelError(f"chance variable {var.id} has no CPT")
            if cpt.scope != var.fam or cpt.cards != tuple(cards[v] for v in var.fam):
                raise ModelError(f"CPT of {var.id} has scope {cpt.scope}, expected {var.fam}")
            _check_conditional(cpt, f"CPT of variable {var.id}")
        extra = set(self.cpts) - {v.id for v in self.variables}
        if extra:
            raise ModelError(f"CPTs for unknown variables {sorted(extra)}")
        for j, u in enumerate(self.utilities):
            for v, c in zip(u.scope, u.cards):
                if not 0 <= v < n or cards[v] != c:
                    raise ModelError(f"utility {j} references variable {v} with cardinality {c}")
        return self

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(v.id for v in self.variables)
        g.add_edges_from((p, v.id) for v in self.variables for p in v.parents)
        return g

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def cards(self) -> Tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def decision_ids(self) -> List[int]:
        return [v.id for v in self.variables if v.kind == "decision"]

    @property
    def chance_ids(self) -> List[int]:
        return [v.id for v in self.variables if v.kind == "chance"]

    def parents(self, i: int) -> Tuple[int, ...]:
        return self.variables[i].parents

    def fam(self, i: int) -> Tuple[int, ...]:
        return self.variables[i].fam

    def fam_cards(self, i: int) -> Tuple[int, ...]:
        return tuple(self.variables[v].cardinality for v in self.fam(i))


class Strategy(BaseModel):
    """Per-decision conditional tables with scope (*pa(d), d)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    policies: Dict[int, DiscreteFactor] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_rows(self) -> "Strategy":
        for d, f in self.policies.items():
            if f.scope[-1:] != (d,):
                raise ModelError(f"policy of {d} must end its scope with {d}, got {f.scope}")
            _check_conditional(f, f"policy of decision {d}")
        return self

    @property
    def is_deterministic(self) -> bool:
        return all(np.all(np.isclose(np.max(f.values, axis=-1), 1.0, rtol=0, atol=NORMALIZATION_TOL)) for f in self.policies.values())

    def choices(self, d: int) -> np.ndarray:
        """Row-argmax table over pa(d) (lowest index on ties)."""
        return np.argmax(self.policies[d].log_values, axis=-1)

    @classmethod
    def uniform(cls, diagram: InfluenceDiagram) -> "Strategy":
        policies = {}
        for d in diagram.decision_ids:
            cards = diagram.fam_cards(d)
            policies[d] = DiscreteFactor(diagram.fam(d), cards, np.full(cards, -np.log(cards[-1])))
        return cls(policies=policies)

    @classmethod
    def from_choices(cls, diagram: InfluenceDiagram, choices: Dict[int, Any]) -> "Strategy":
        policies = {}
        for d in diagram.decision_ids:
            if d not in choices:
                raise ModelError(f"no choice table for decision {d}")
            cards = diagram.fam_cards(d)
            pick = np.broadcast_to(np.asarray(choices[d], dtype=int), cards[:-1])
            table = np.full(cards, -np.inf)
            np.put_along_axis(table, pick[..., None], 0.0, axis=-1)
            policies[d] = DiscreteFactor(diagram.fam(d), cards, table)
        return cls(policies=policies)

    @classmethod
    def random(cls, diagram: InfluenceDiagram, rng: np.random.Generator) -> "Strategy":
        """Rows drawn from a flat Dirichlet."""
        policies = {}
        for d in diagram.decision_ids:
            cards = diagram.fam_cards(d)
            rows = rng.dirichlet(np.ones(cards[-1]), size=int(np.prod(cards[:-1], dtype=int)))
            rows = np.maximum(rows, 1e-300)
            rows = rows / rows.sum(axis=-1, keepdims=True)
            policies[d] = DiscreteFactor.from_values(diagram.fam(d), cards, rows.reshape(cards))
        return cls(policies=policies)


class AugmentedModel(BaseModel):
    """Factors whose product is proportional to exp(theta(x))."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    factors: List[DiscreteFactor]
    cards: Dict[int, int]
    selector_id: Optional[int] = None
    decisions: Dict[int, Tuple[int, ...]] = Field(default_factory=dict)
    diagram: InfluenceDiagram

    @property
    def variables(self) -> List[int]:
        return sorted(self.cards)

    def with_factors(self, factors: List[DiscreteFactor]) -> "AugmentedModel":
        return self.model_copy(update={"factors": list(factors)})


class JointTable(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    factor: DiscreteFactor

    @model_validator(mode="after")
    def check_normalized(self) -> "JointTable":
        total = float(np.exp(self.factor.log_total()))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ModelError(f"joint table sums to {total:.12g}")
        return self

    @property
    def scope(self) -> Tuple[int, ...]:
        return self.factor.scope


# ---------------------------------------------------------------------
# SOLVER OPTIONS / RESULTS
# ---------------------------------------------------------------------
Schedule = Literal["fixed", "anneal", "zero"]
InitKind = Literal["uniform", "random", "strategy"]


class BpOptions(BaseModel):
    schedule: Schedule = "zero"
    epsilon: float = Field(default=1.0, ge=0.0, le=1.0)
    damping: float = Field(default=float(_BP.get("damping", 0.0)), ge=0.0, lt=1.0)
    tol: float = Field(default=float(_BP.get("tol", 1e-6)), gt=0.0)
    max_iters: int = Field(default=int(_BP.get("max_iters", 100)), ge=1)
    tie_tol: float = Field(default=float(_BP.get("tie_tol", 1e-9)), ge=0.0)
    seed: Optional[int] = None
    label: str = "bp"

    def temperature(self, t: int) -> float:
        if self.schedule == "zero":
            return 0.0
        if self.schedule == "anneal":
            return 1.0 / t
        return self.epsilon


class TraceRow(BaseModel):
    algorithm: str
    junction: str
    seed: int
    iter: int
    temp_or_w: float
    rounded_eu: float
    soft_eu: float
    residual: float
    ms: float


Variant = Literal["spu", "bp0", "anneal", "anneal-perturbed", "prox"]
JunctionKind = Literal["tree", "loopy"]
WeightSchedule = Literal["one", "harmonic"]


class AlgorithmSpec(BaseModel):
    variant: Variant = "prox"
    junction: JunctionKind = "tree"
    weights: WeightSchedule = "one"
    inner_iters: int = Field(default=int(_BP.get("inner_iters", 5)), ge=1)
    restarts: int = Field(default=int(_SOLVERS.get("restarts", 1)), ge=1)
    seed: int = int(_SOLVERS.get("seed", 0))
    seeds: Optional[List[int]] = None
    tol: float = Field(default=float(_BP.get("tol", 1e-6)), gt=0.0)
    max_iters: int = Field(default=int(_BP.get("max_iters", 100)), ge=1)
    damping: float = Field(default=float(_BP.get("damping", 0.0)), ge=0.0, lt=1.0)
    perturbation_scale: float = Field(default=float(section("perturbation").get("scale", 0.1)), ge=0.0)
    init_strategy: Optional[Strategy] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def label(self) -> str:
        if self.variant == "prox":
            return f"prox-{self.weights}"
        return self.variant

    def seed_list(self) -> List[int]:
        return list(self.seeds) if self.seeds else [self.seed + k for k in range(self.restarts)]


class SolveResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    algorithm: str
    junction: str
    strategy: Strategy
    eu: float
    log_eu: float
    trace: List[TraceRow] = Field(default_factory=list)
    iterations: int = 0
    final_residual: float = 0.0
    converged: bool = False
    seed: int = 0
    restart_index: int = 0
    restart_traces: List[List[TraceRow]] = Field(default_factory=list)


class RandomIdConfig(BaseModel):
    n_vars: int = Field(default=int(_RANDOM.get("n_vars", 20)), ge=2)
    max_parents: int = Field(default=int(_RANDOM.get("max_parents", 3)), ge=0)
    cardinality: int = Field(default=int(_RANDOM.get("cardinality", 4)), ge=2)
    decision_fraction: float = Field(default=float(_RANDOM.get("decision_fraction", 0.3)), ge=0.0, lt=1.0)
    dirichlet_alpha: float = Field(default=float(_RANDOM.get("dirichlet_alpha", 1.0)), gt=0.0)
    gamma_alpha: float = Field(default=float(_RANDOM.get("gamma_alpha", 1.0)), gt=0.0)
    utility_mode: UtilityMode = _RANDOM.get("utility_mode", "additive")
    no_forgetting: bool = False
    seed: int = 0


class SensorNetConfig(BaseModel):
    topology: Literal["grid", "random"] = "grid"
    width: int = Field(default=int(_SENSOR.get("width", 3)), ge=1)
    height: int = Field(default=int(_SENSOR.get("height", 3)), ge=1)
    n_nodes: int = Field(default=9, ge=1)
    n_edges: int = Field(default=12, ge=0)
    coupling: float = float(_SENSOR.get("coupling", 1.5))
    accurate_prob: float = Field(default=float(_SENSOR.get("accurate_prob", 0.9)), gt=0.0, lt=1.0)
    noisy_prob: float = Field(default=float(_SENSOR.get("noisy_prob", 0.6)), gt=0.0, lt=1.0)
    accurate: Optional[List[int]] = None
    signal_edges: Optional[List[Tuple[int, int]]] = None
    reward: float = Field(default=float(_SENSOR.get("reward", np.e)), gt=0.0)
    cost: float = Field(default=float(_SENSOR.get("cost", 1.0)), ge=0.0)
    seed: int = 0
