"""Perfect-recall detection and sum-max-sum elimination."""
import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import ModelError
from .evaluate import build_augmented_model
from .factors import (
    DiscreteFactor,
    factor_combine,
    factor_reduce,
    interaction_graph,
    merge_cards,
    min_fill_order,
)
from .models import ELIMINATION_CAP, InfluenceDiagram, Strategy

logger = logging.getLogger(__name__)


class TemporalOrder(BaseModel):
    """Blocks r_0, d_1, r_1, ..., d_m, r_m stored as m+1 chance sets and m decisions."""

    chance_blocks: List[List[int]] = Field(default_factory=lambda: [[]])
    decisions: List[int] = Field(default_factory=list)

    def blocks(self) -> List[Tuple[str, List[int]]]:
        out = [("sum", self.chance_blocks[0])]
        for d, r in zip(self.decisions, self.chance_blocks[1:]):
            out.append(("max", [d]))
            out.append(("sum", r))
        return out


def check_perfect_recall(diagram: InfluenceDiagram) -> Optional[TemporalOrder]:
    decisions = sorted(diagram.decision_ids, key=lambda d: (len(diagram.parents(d)), d))
    for i, d in enumerate(decisions):
        seen = set(diagram.parents(d))
        for earlier in decisions[:i]:
            if not set(diagram.fam(earlier)) <= seen:
                return None
    assigned: set = set()
    blocks: List[List[int]] = []
    chance = set(diagram.chance_ids)
    for d in decisions:
        block = sorted(p for p in diagram.parents(d) if p in chance and p not in assigned)
        assigned.update(block)
        blocks.append(block)
    blocks.append(sorted(chance - assigned))
    return TemporalOrder(chance_blocks=blocks, decisions=decisions)


def _validate_order(diagram: InfluenceDiagram, order: TemporalOrder) -> None:
    if sorted(order.decisions) != sorted(diagram.decision_ids):
        raise ModelError("temporal order does not list every decision exactly once")
    if len(order.chance_blocks) != len(order.decisions) + 1:
        raise ModelError("temporal order needs one more chance block than decisions")
    flat = [v for b in order.chance_blocks for v in b]
    if sorted(flat) != sorted(diagram.chance_ids):
        raise ModelError("temporal order chance blocks do not partition the chance variables")
    earlier: set = set(order.chance_blocks[0])
    for i, d in enumerate(order.decisions):
        pa = set(diagram.parents(d))
        if not pa <= earlier:
            raise ModelError(f"decision {d} observes variables placed after it")
        for prev in order.decisions[:i]:
            if not set(diagram.fam(prev)) <= pa:
                raise ModelError(f"decision {d} does not recall decision {prev} and its parents")
        earlier.add(d)
        earlier.update(order.chance_blocks[i + 1])


def _extract_policy(bucket: DiscreteFactor, diagram: InfluenceDiagram, d: int) -> np.ndarray:
    fam = diagram.fam(d)
    outside = set(bucket.scope) - set(fam)
    if outside:
        raise ModelError(f"decision {d} depends on unobserved variables {sorted(outside)} at elimination")
    full = factor_combine([bucket, DiscreteFactor.ones(fam, diagram.fam_cards(d))]).transpose(fam)
    return np.argmax(full.log_values, axis=-1)


def sum_max_sum(
    diagram: InfluenceDiagram,
    order: Optional[TemporalOrder] = None,
    cap: float = ELIMINATION_CAP,
) -> Tuple[float, Strategy]:
    """Exact MEU for perfect-recall diagrams by constrained bucket elimination."""
    if order is None:
        order = check_perfect_recall(diagram)
        if order is None:
            raise ModelError("diagram does not satisfy perfect recall")
    _validate_order(diagram, order)
    model = build_augmented_model(diagram)
    cards = dict(model.cards)
    pool = list(model.factors)
    blocks = order.blocks()
    if model.selector_id is not None:
        blocks[-1] = ("sum", blocks[-1][1] + [model.selector_id])

    choices = {}
    for mode, block in reversed(blocks):
        if not block:
            continue
        if mode == "max":
            d = block[0]
            bucket = [f for f in pool if d in f.scope]
            pool = [f for f in pool if d not in f.scope]
            phi = factor_combine(bucket, cap=cap) if bucket else DiscreteFactor.ones([d], [cards[d]])
            choices[d] = _extract_policy(phi, diagram, d)
            pool.append(factor_reduce(phi, [d], "max"))
            continue
        adj = interaction_graph((f.scope for f in pool), cards)
        for v in min_fill_order(adj, cards, candidates=[v for v in block if v in adj]):
            bucket = [f for f in pool if v in f.scope]
            if not bucket:
                continue
            pool = [f for f in pool if v not in f.scope]
            pool.append(factor_reduce(factor_combine(bucket, cap=cap), [v], "sum"))
    leftover = merge_cards(pool)
    if leftover:
        raise ModelError(f"variables {sorted(leftover)} were never eliminated")
    log_meu = float(sum(float(f.log_values) for f in pool))
    logger.debug("sum-max-sum finished with log MEU %.6g", log_meu)
    return float(np.exp(log_meu)), Strategy.from_choices(diagram, choices)
