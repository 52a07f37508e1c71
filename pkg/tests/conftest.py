import numpy as np
import pytest

from app.bench.generators import copy_pair, blind_pair, gen_random_id
from app.errors import ModelError
from app.factors import DiscreteFactor
from app.models import InfluenceDiagram, RandomIdConfig, Variable

CHAIN_UAI = """BAYES
3
2 2 2
3
1 0
2 0 1
2 1 2

2
0.6 0.4

4
0.7 0.3 0.2 0.8

4
0.9 0.1 0.25 0.75
"""


@pytest.fixture
def copy_pair_id() -> InfluenceDiagram:
    return copy_pair()


@pytest.fixture
def blind_pair_id() -> InfluenceDiagram:
    return blind_pair()


@pytest.fixture
def chain_id() -> InfluenceDiagram:
    """a -> b -> c, no decisions, one multiplicative utility on c."""
    variables = [
        Variable(id=0, cardinality=2),
        Variable(id=1, cardinality=2, parents=(0,)),
        Variable(id=2, cardinality=2, parents=(1,)),
    ]
    cpts = {
        0: DiscreteFactor.from_values((0,), (2,), [0.6, 0.4]),
        1: DiscreteFactor.from_values((0, 1), (2, 2), [[0.7, 0.3], [0.2, 0.8]]),
        2: DiscreteFactor.from_values((1, 2), (2, 2), [[0.9, 0.1], [0.25, 0.75]]),
    }
    utilities = [DiscreteFactor.from_values((2,), (2,), [1.0, 3.0])]
    return InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode="multiplicative")


@pytest.fixture
def observed_id() -> InfluenceDiagram:
    """Chance c with p(c=1)=0.7, decision d observing c, utility 1 on a match and 0.01 otherwise."""
    variables = [Variable(id=0, cardinality=2), Variable(id=1, cardinality=2, kind="decision", parents=(0,))]
    cpts = {0: DiscreteFactor.from_values((0,), (2,), [0.3, 0.7])}
    utilities = [DiscreteFactor.from_values((0, 1), (2, 2), [[1.0, 0.01], [0.01, 1.0]])]
    return InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode="multiplicative")


@pytest.fixture
def blind_id(observed_id) -> InfluenceDiagram:
    variables = [observed_id.variables[0], Variable(id=1, cardinality=2, kind="decision")]
    return InfluenceDiagram(variables=variables, cpts=observed_id.cpts, utilities=observed_id.utilities, utility_mode="multiplicative")


@pytest.fixture
def chain_uai_text() -> str:
    return CHAIN_UAI


def _strategy_count(diagram: InfluenceDiagram) -> float:
    count = 1.0
    for d in diagram.decision_ids:
        cards = diagram.fam_cards(d)
        count *= float(cards[-1]) ** int(np.prod(cards[:-1], dtype=int))
    return count


@pytest.fixture(scope="session")
def small_limids():
    """Factory: the first `count` random diagrams (by seed) that build and stay brute-forceable.

    Results are shared across the session, so parametrized tests can index into one list.
    """
    built = {}

    def build(count: int, max_strategies: float = 4096, **overrides):
        key = (count, max_strategies, tuple(sorted(overrides.items())))
        if key not in built:
            built[key] = _scan(count, max_strategies, overrides)
        return built[key]

    return build


def _scan(count: int, max_strategies: float, overrides: dict):
    cfg = dict(n_vars=7, max_parents=2, cardinality=2, decision_fraction=0.3)
    cfg.update(overrides)
    out = []
    seed = 0
    while len(out) < count and seed < 20000:
        try:
            diagram = gen_random_id(RandomIdConfig(seed=seed, **cfg))
        except ModelError:
            diagram = None
        seed += 1
        if diagram is not None and diagram.decision_ids and _strategy_count(diagram) <= max_strategies:
            out.append(diagram)
    assert len(out) == count
    return out
