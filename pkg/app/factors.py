"""Dense discrete factors stored as log-values.

A factor over scope (a, b, ...) holds a numpy array of shape (|a|, |b|, ...),
row-major in scope order. Exact zeros are -inf.
"""
import logging
from typing import Dict, Iterable, List, Literal, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateSliceError, ModelError, NumericalSupportError, ResourceCapError

logger = logging.getLogger(__name__)

ReduceMode = Literal["sum", "max"]


class DiscreteFactor:
    __slots__ = ("scope", "cards", "log_values", "_linear")

    def __init__(self, scope: Sequence[int], cards: Sequence[int], log_values):
        scope = tuple(int(v) for v in scope)
        cards = tuple(int(c) for c in cards)
        if len(scope) != len(cards):
            raise ModelError(f"scope {scope} and cardinalities {cards} differ in length")
        if len(set(scope)) != len(scope):
            raise ModelError(f"repeated variable in scope {scope}")
        arr = np.array(log_values, dtype=float)
        size = int(np.prod(cards, dtype=np.int64)) if cards else 1
        if arr.size != size:
            raise ModelError(f"table has {arr.size} entries, scope {scope} needs {size}")
        arr = arr.reshape(cards)
        if np.isnan(arr).any() or np.isposinf(arr).any():
            raise ModelError(f"factor over {scope} has NaN or +inf entries")
        arr.flags.writeable = False
        self.scope = scope
        self.cards = cards
        self.log_values = arr
        self._linear = None

    @classmethod
    def from_values(cls, scope: Sequence[int], cards: Sequence[int], values) -> "DiscreteFactor":
        values = np.asarray(values, dtype=float)
        if (values < 0).any():
            raise ModelError(f"negative entries in factor over {tuple(scope)}")
        with np.errstate(divide="ignore"):
            f = cls(scope, cards, np.log(values))
        # keep the exact linear entries so text formats round-trip bit for bit
        linear = values.reshape(f.cards).copy()
        linear.flags.writeable = False
        f._linear = linear
        return f

    @classmethod
    def ones(cls, scope: Sequence[int], cards: Sequence[int]) -> "DiscreteFactor":
        return cls(scope, cards, np.zeros(tuple(cards)))

    @classmethod
    def scalar(cls, log_value: float = 0.0) -> "DiscreteFactor":
        return cls((), (), np.array(log_value))

    @property
    def values(self) -> np.ndarray:
        if self._linear is not None:
            return self._linear
        return np.exp(self.log_values)

    @property
    def card_map(self) -> Dict[int, int]:
        return dict(zip(self.scope, self.cards))

    @property
    def size(self) -> int:
        return int(self.log_values.size)

    def log_total(self) -> float:
        with np.errstate(divide="ignore"):
            return float(logsumexp(self.log_values)) if self.size else float("-inf")

    def aligned(self, scope: Sequence[int], cards: Sequence[int]) -> np.ndarray:
        """Log table permuted and reshaped to broadcast against `scope`."""
        missing = set(self.scope) - set(scope)
        if missing:
            raise ModelError(f"variables {sorted(missing)} are outside scope {tuple(scope)}")
        present = [v for v in scope if v in self.scope]
        axes = [self.scope.index(v) for v in present]
        table = np.transpose(self.log_values, axes) if axes else self.log_values
        shape = [c if v in self.scope else 1 for v, c in zip(scope, cards)]
        return table.reshape(shape)

    def transpose(self, scope: Sequence[int]) -> "DiscreteFactor":
        scope = tuple(scope)
        if set(scope) != set(self.scope):
            raise ModelError(f"cannot reorder {self.scope} as {scope}")
        cmap = self.card_map
        cards = tuple(cmap[v] for v in scope)
        return DiscreteFactor(scope, cards, self.aligned(scope, cards))

    def normalize(self) -> "DiscreteFactor":
        total = self.log_total()
        if not np.isfinite(total):
            raise DegenerateSliceError(f"factor over {self.scope} is identically zero")
        return DiscreteFactor(self.scope, self.cards, self.log_values - total)

    def __repr__(self) -> str:
        return f"DiscreteFactor(scope={self.scope}, cards={self.cards})"


def merge_cards(factors: Iterable[DiscreteFactor]) -> Dict[int, int]:
    cards: Dict[int, int] = {}
    for f in factors:
        for v, c in zip(f.scope, f.cards):
            if cards.setdefault(v, c) != c:
                raise ModelError(f"variable {v} has cardinality {cards[v]} and {c}")
    return cards


def factor_combine(factors: Sequence[DiscreteFactor], cap: float | None = None) -> DiscreteFactor:
    """Product of factors (sum of log-values) over the union of their scopes."""
    factors = list(factors)
    if not factors:
        return DiscreteFactor.scalar()
    if len(factors) == 1:
        return factors[0]
    cmap = merge_cards(factors)
    scope: List[int] = []
    for f in factors:
        scope.extend(v for v in f.scope if v not in scope)
    cards = tuple(cmap[v] for v in scope)
    if cap is not None:
        size = float(np.prod(cards, dtype=float))
        if size > cap:
            raise ResourceCapError(f"product over {len(scope)} variables", size, cap)
    total = np.zeros(cards)
    for f in factors:
        total = total + f.aligned(scope, cards)
    return DiscreteFactor(scope, cards, total)


def factor_reduce(f: DiscreteFactor, drop: Iterable[int], mode: ReduceMode = "sum") -> DiscreteFactor:
    drop = set(drop)
    unknown = drop - set(f.scope)
    if unknown:
        raise ModelError(f"cannot eliminate {sorted(unknown)} from scope {f.scope}")
    if not drop:
        return f
    axes = tuple(i for i, v in enumerate(f.scope) if v in drop)
    keep = [(v, c) for v, c in zip(f.scope, f.cards) if v not in drop]
    if mode == "sum":
        with np.errstate(divide="ignore"):
            table = logsumexp(f.log_values, axis=axes)
    elif mode == "max":
        table = np.max(f.log_values, axis=axes)
    else:
        raise ValueError(f"unknown reduce mode {mode!r}")
    return DiscreteFactor([v for v, _ in keep], [c for _, c in keep], table)


def marginal(f: DiscreteFactor, keep: Iterable[int], mode: ReduceMode = "sum") -> DiscreteFactor:
    keep = set(keep)
    return factor_reduce(f, [v for v in f.scope if v not in keep], mode)


def factor_power_normalize(f: DiscreteFactor, over: Iterable[int], exponent: float) -> DiscreteFactor:
    """Raise to `exponent` and normalize every slice over the `over` variables."""
    over = set(over)
    if not over <= set(f.scope):
        raise ModelError(f"normalization variables {sorted(over - set(f.scope))} not in {f.scope}")
    if exponent <= 0:
        raise ValueError("exponent must be positive; use the argmax limit for zero temperature")
    axes = tuple(i for i, v in enumerate(f.scope) if v in over)
    powered = f.log_values * exponent
    with np.errstate(divide="ignore"):
        norm = logsumexp(powered, axis=axes, keepdims=True)
    if not np.isfinite(norm).all():
        raise DegenerateSliceError(f"identically zero slice while normalizing {f.scope} over {sorted(over)}")
    return DiscreteFactor(f.scope, f.cards, powered - norm)


def factor_divide(num: DiscreteFactor, den: DiscreteFactor) -> DiscreteFactor:
    """num / den with 0/0 = 0; a positive entry over a zero raises."""
    den_table = den.aligned(num.scope, num.cards)
    num_table = num.log_values
    zero_den = np.isneginf(np.broadcast_to(den_table, num_table.shape))
    if (zero_den & np.isfinite(num_table)).any():
        raise NumericalSupportError(f"division by a zero entry of {den.scope} under a positive numerator")
    out = np.where(zero_den, -np.inf, num_table - np.where(np.isneginf(den_table), 0.0, den_table))
    return DiscreteFactor(num.scope, num.cards, out)


def interaction_graph(scopes: Iterable[Sequence[int]], variables: Iterable[int]) -> Dict[int, set]:
    adj: Dict[int, set] = {v: set() for v in variables}
    for scope in scopes:
        for v in scope:
            adj.setdefault(v, set()).update(u for u in scope if u != v)
    return adj


def min_fill_order(adj: Dict[int, set], cards: Dict[int, int], candidates: Iterable[int] | None = None) -> List[int]:
    """Greedy min-fill order of `candidates` (default all); ties by clique weight, then id.

    `adj` is updated in place with the fill edges.
    """
    remaining = set(adj) if candidates is None else set(candidates)
    order: List[int] = []
    while remaining:
        best: Tuple[int, float, int] | None = None
        for v in remaining:
            nbrs = list(adj[v])
            fill = sum(1 for i, a in enumerate(nbrs) for b in nbrs[i + 1:] if b not in adj[a])
            weight = float(np.prod([cards[u] for u in nbrs], dtype=float)) * cards[v]
            key = (fill, weight, v)
            if best is None or key < best:
                best = key
        v = best[2]
        eliminate_vertex(adj, v)
        remaining.discard(v)
        order.append(v)
    return order


def eliminate_vertex(adj: Dict[int, set], v: int) -> set:
    nbrs = adj.pop(v)
    for a in nbrs:
        adj[a].discard(v)
        adj[a].update(nbrs - {a})
    return nbrs


def eliminate(
    factors: Sequence[DiscreteFactor],
    order: Sequence[int],
    mode: ReduceMode = "sum",
    cap: float | None = None,
) -> List[DiscreteFactor]:
    """Bucket elimination of `order`; returns the remaining factor pool."""
    pool = list(factors)
    for v in order:
        bucket = [f for f in pool if v in f.scope]
        if not bucket:
            continue
        pool = [f for f in pool if v not in f.scope]
        pool.append(factor_reduce(factor_combine(bucket, cap=cap), [v], mode))
    return pool


def log_partition(factors: Sequence[DiscreteFactor], cap: float | None = None) -> float:
    """log of the sum over all assignments of the factor product."""
    cards = merge_cards(factors)
    adj = interaction_graph((f.scope for f in factors), cards)
    order = min_fill_order(adj, cards)
    pool = eliminate(factors, order, "sum", cap=cap)
    return float(sum(float(f.log_values) for f in pool))


def entropy(f: DiscreteFactor) -> float:
    """Shannon entropy of a normalized factor, with 0 log 0 = 0."""
    p = f.values
    mask = p > 0
    return float(-np.sum(p[mask] * f.log_values[mask]))


def expectation(f: DiscreteFactor, theta: np.ndarray) -> float:
    """Sum of p * theta over the support of the normalized factor f."""
    p = f.values
    mask = p > 0
    if np.isneginf(theta[mask]).any():
        return float("-inf")
    return float(np.sum(p[mask] * theta[mask]))
