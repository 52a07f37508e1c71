"""Line-oriented text format for influence diagrams.

    MODE ADD|MUL
    VARS n
    <id> <card> [name]
    DECISIONS k
    <id> : <parent ids>
    CPTS k
    <id> : <parent ids> | <values>
    UTILS k
    <scope ids> | <values>

Values are linear-space, row-major with the last scope variable fastest;
a CPT's scope is (*parents, id). `#` starts a comment.
"""
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from ..errors import FormatError
from ..factors import DiscreteFactor
from ..models import InfluenceDiagram, Variable

_MODES = {"ADD": "additive", "MUL": "multiplicative"}
_TOKENS = {v: k for k, v in _MODES.items()}

Line = Tuple[int, List[str]]


def _lines(text: str) -> List[Line]:
    out = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            out.append((line_no, tokens))
    return out


def _int(tok: str, line: int, pos: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"expected integer {what}, got {tok!r}", line=line, token=pos) from None


def _values(tokens: List[str], line: int, offset: int) -> np.ndarray:
    out = []
    for i, tok in enumerate(tokens):
        try:
            value = float(tok)
        except ValueError:
            raise FormatError(f"expected number, got {tok!r}", line=line, token=offset + i) from None
        if not np.isfinite(value) or value < 0:
            raise FormatError(f"table entries must be finite and non-negative, got {tok!r}", line=line, token=offset + i)
        out.append(value)
    return np.array(out, dtype=float)


class _Reader:
    def __init__(self, text: str):
        self.lines = _lines(text)
        self.pos = 0

    def take(self, what: str) -> Line:
        if self.pos >= len(self.lines):
            last = self.lines[-1][0] if self.lines else 1
            raise FormatError(f"unexpected end of file, expected {what}", line=last)
        item = self.lines[self.pos]
        self.pos += 1
        return item

    def header(self, keyword: str) -> Tuple[int, List[str]]:
        line, tokens = self.take(f"{keyword} section")
        if tokens[0].upper() != keyword:
            raise FormatError(f"expected {keyword}, got {tokens[0]!r}", line=line, token=0)
        if len(tokens) != 2:
            raise FormatError(f"{keyword} takes exactly one argument", line=line, token=min(len(tokens), 2))
        return line, tokens

    def count(self, keyword: str) -> int:
        line, tokens = self.header(keyword)
        value = _int(tokens[1], line, 1, f"{keyword} count")
        if value < 0:
            raise FormatError(f"{keyword} count must be non-negative", line=line, token=1)
        return value


def _ids(tokens: List[str], line: int, offset: int, n: int) -> Tuple[int, ...]:
    ids = []
    for i, tok in enumerate(tokens):
        v = _int(tok, line, offset + i, "variable id")
        if not 0 <= v < n:
            raise FormatError(f"variable {v} is not declared", line=line, token=offset + i)
        ids.append(v)
    return tuple(ids)


def _split(tokens: List[str], sep: str, line: int) -> Tuple[List[str], List[str]]:
    if sep not in tokens:
        raise FormatError(f"missing {sep!r}", line=line, token=len(tokens))
    at = tokens.index(sep)
    return tokens[:at], tokens[at + 1:]


def parse_id(text: str) -> InfluenceDiagram:
    r = _Reader(text)
    line, tokens = r.header("MODE")
    mode = _MODES.get(tokens[1].upper())
    if mode is None:
        raise FormatError(f"utility mode must be ADD or MUL, got {tokens[1]!r}", line=line, token=1)

    n = r.count("VARS")
    cards: List[int] = []
    names: List[str | None] = []
    for i in range(n):
        line, tokens = r.take(f"variable {i}")
        if _int(tokens[0], line, 0, "variable id") != i:
            raise FormatError(f"variables must be listed as 0..{n - 1}; expected {i}", line=line, token=0)
        if len(tokens) not in (2, 3):
            raise FormatError("variable lines are '<id> <card> [name]'", line=line, token=min(len(tokens), 3))
        card = _int(tokens[1], line, 1, "cardinality")
        if card < 1:
            raise FormatError("cardinality must be positive", line=line, token=1)
        cards.append(card)
        names.append(tokens[2] if len(tokens) == 3 else None)

    parents: Dict[int, Tuple[int, ...]] = {}
    decisions = set()
    for _ in range(r.count("DECISIONS")):
        line, tokens = r.take("decision line")
        head, rest = _split(tokens, ":", line)
        if len(head) != 1:
            raise FormatError("decision lines are '<id> : <parents>'", line=line, token=0)
        d = _ids(head, line, 0, n)[0]
        if d in decisions:
            raise FormatError(f"decision {d} declared twice", line=line, token=0)
        decisions.add(d)
        parents[d] = _ids(rest, line, 2, n)

    cpts: Dict[int, DiscreteFactor] = {}
    for _ in range(r.count("CPTS")):
        line, tokens = r.take("CPT line")
        head, rest = _split(tokens, ":", line)
        if len(head) != 1:
            raise FormatError("CPT lines are '<id> : <parents> | <values>'", line=line, token=0)
        v = _ids(head, line, 0, n)[0]
        if v in decisions:
            raise FormatError(f"decision {v} cannot carry a CPT", line=line, token=0)
        if v in cpts:
            raise FormatError(f"second CPT for variable {v}", line=line, token=0)
        pa_tokens, value_tokens = _split(rest, "|", line)
        pa = _ids(pa_tokens, line, 2, n)
        scope = pa + (v,)
        values = _values(value_tokens, line, 3 + len(pa_tokens))
        need = int(np.prod([cards[u] for u in scope], dtype=np.int64))
        if values.size != need:
            raise FormatError(f"CPT of {v} has {values.size} entries, scope needs {need}", line=line, token=3 + len(pa_tokens))
        parents[v] = pa
        cpts[v] = DiscreteFactor.from_values(scope, [cards[u] for u in scope], values)
    missing = [v for v in range(n) if v not in decisions and v not in cpts]
    if missing:
        raise FormatError(f"chance variables {missing} have no CPT", line=line)

    utilities = []
    for _ in range(r.count("UTILS")):
        line, tokens = r.take("utility line")
        scope_tokens, value_tokens = _split(tokens, "|", line)
        scope = _ids(scope_tokens, line, 0, n)
        values = _values(value_tokens, line, len(scope_tokens) + 1)
        need = int(np.prod([cards[u] for u in scope], dtype=np.int64))
        if values.size != need:
            raise FormatError(f"utility has {values.size} entries, scope needs {need}", line=line, token=len(scope_tokens) + 1)
        utilities.append(DiscreteFactor.from_values(scope, [cards[u] for u in scope], values))
    if r.pos < len(r.lines):
        raise FormatError("content after the UTILS section", line=r.lines[r.pos][0], token=0)

    variables = [
        Variable(id=i, cardinality=cards[i], kind="decision" if i in decisions else "chance", parents=parents[i], name=names[i])
        for i in range(n)
    ]
    return InfluenceDiagram(variables=variables, cpts=cpts, utilities=utilities, utility_mode=mode)


def _ids_text(ids) -> str:
    return " ".join(map(str, ids))


def _values_text(f: DiscreteFactor) -> str:
    return " ".join(repr(float(x)) for x in f.values.ravel())


def write_id(diagram: InfluenceDiagram) -> str:
    lines = [f"MODE {_TOKENS[diagram.utility_mode]}", f"VARS {diagram.n_vars}"]
    for v in diagram.variables:
        lines.append(f"{v.id} {v.cardinality}" + (f" {v.name}" if v.name else ""))
    lines.append(f"DECISIONS {len(diagram.decision_ids)}")
    for d in diagram.decision_ids:
        lines.append(f"{d} : {_ids_text(diagram.parents(d))}".rstrip())
    lines.append(f"CPTS {len(diagram.chance_ids)}")
    for v in diagram.chance_ids:
        lines.append(f"{v} : {_ids_text(diagram.parents(v))} | {_values_text(diagram.cpts[v])}".replace(":  |", ": |"))
    lines.append(f"UTILS {len(diagram.utilities)}")
    for u in diagram.utilities:
        lines.append(f"{_ids_text(u.scope)} | {_values_text(u)}".lstrip())
    return "\n".join(lines) + "\n"


def read_id(path: str | Path) -> InfluenceDiagram:
    with open(path, "r", encoding="utf-8") as f:
        return parse_id(f.read())
