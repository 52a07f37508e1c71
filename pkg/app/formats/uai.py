"""UAI Bayes-net files: BAYES preamble, cardinalities, scopes, then tables.

Tables are linear-space and row-major with the last scope variable varying
fastest.
"""
from pathlib import Path
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from ..errors import FormatError, ModelError


class UaiNetwork(BaseModel):
    cardinalities: List[int]
    scopes: List[List[int]]
    tables: List[List[float]]

    @model_validator(mode="after")
    def check_tables(self) -> "UaiNetwork":
        if len(self.scopes) != len(self.tables):
            raise ModelError(f"{len(self.scopes)} scopes but {len(self.tables)} tables")
        n = len(self.cardinalities)
        for i, (scope, table) in enumerate(zip(self.scopes, self.tables)):
            if any(not 0 <= v < n for v in scope):
                raise ModelError(f"factor {i} references a variable outside 0..{n - 1}")
            need = int(np.prod([self.cardinalities[v] for v in scope], dtype=np.int64))
            if len(table) != need:
                raise ModelError(f"factor {i} has {len(table)} entries, scope needs {need}")
        return self

    @property
    def n_vars(self) -> int:
        return len(self.cardinalities)


class _Tokens:
    def __init__(self, text: str):
        self._items: List[Tuple[str, int, int]] = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self._items.append((tok, line_no, len(self._items)))
        self._pos = 0

    @property
    def exhausted(self) -> bool:
        return self._pos >= len(self._items)

    def next(self, what: str) -> Tuple[str, int, int]:
        if self.exhausted:
            last_line = self._items[-1][1] if self._items else 1
            raise FormatError(f"unexpected end of file, expected {what}", line=last_line, token=len(self._items))
        item = self._items[self._pos]
        self._pos += 1
        return item

    def integer(self, what: str, low: int = 0) -> int:
        tok, line, idx = self.next(what)
        try:
            value = int(tok)
        except ValueError:
            raise FormatError(f"expected integer {what}, got {tok!r}", line=line, token=idx) from None
        if value < low:
            raise FormatError(f"{what} must be >= {low}, got {value}", line=line, token=idx)
        return value

    def real(self, what: str) -> float:
        tok, line, idx = self.next(what)
        try:
            value = float(tok)
        except ValueError:
            raise FormatError(f"expected number {what}, got {tok!r}", line=line, token=idx) from None
        if not np.isfinite(value) or value < 0:
            raise FormatError(f"{what} must be a finite non-negative number, got {tok!r}", line=line, token=idx)
        return value

    def here(self) -> Tuple[int, int]:
        if self.exhausted:
            return (self._items[-1][1] if self._items else 1), len(self._items)
        return self._items[self._pos][1], self._items[self._pos][2]


def parse_uai(text: str) -> UaiNetwork:
    toks = _Tokens(text)
    head, line, idx = toks.next("preamble")
    if head.upper() != "BAYES":
        raise FormatError(f"expected preamble BAYES, got {head!r}", line=line, token=idx)
    n = toks.integer("variable count")
    cards = [toks.integer(f"cardinality of variable {i}", low=1) for i in range(n)]
    m = toks.integer("factor count")
    scopes = []
    for i in range(m):
        size = toks.integer(f"scope size of factor {i}")
        scope = []
        for _ in range(size):
            line, idx = toks.here()
            v = toks.integer(f"variable id in factor {i}")
            if v >= n:
                raise FormatError(f"factor {i} references variable {v}, only {n} declared", line=line, token=idx)
            if v in scope:
                raise FormatError(f"factor {i} lists variable {v} twice", line=line, token=idx)
            scope.append(v)
        scopes.append(scope)
    tables = []
    for i, scope in enumerate(scopes):
        line, idx = toks.here()
        declared = toks.integer(f"table size of factor {i}")
        need = int(np.prod([cards[v] for v in scope], dtype=np.int64))
        if declared != need:
            raise FormatError(f"factor {i} declares {declared} entries, scope needs {need}", line=line, token=idx)
        tables.append([toks.real(f"entry of factor {i}") for _ in range(declared)])
    if not toks.exhausted:
        line, idx = toks.here()
        raise FormatError(f"trailing tokens after {m} factor tables", line=line, token=idx)
    return UaiNetwork(cardinalities=cards, scopes=scopes, tables=tables)


def write_uai(net: UaiNetwork) -> str:
    """Canonical serialization; parse_uai(write_uai(net)) == net."""
    lines = ["BAYES", str(net.n_vars), " ".join(map(str, net.cardinalities)), str(len(net.scopes))]
    lines.extend(" ".join(map(str, [len(s)] + list(s))) for s in net.scopes)
    for table in net.tables:
        lines.append("")
        lines.append(str(len(table)))
        lines.append(" ".join(repr(float(x)) for x in table))
    return "\n".join(lines) + "\n"


def read_uai(path: str | Path) -> UaiNetwork:
    with open(path, "r", encoding="utf-8") as f:
        return parse_uai(f.read())
