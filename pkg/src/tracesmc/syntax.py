"""Surface syntax tree produced by the parser.

Surface nodes mirror what the programmer wrote (``let``, ``;``,
multi-parameter functions, ``logweight`` ...).  Every node carries a
``span`` (line, column) that is ignored by equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .distributions import Dist

Span = Optional[tuple]


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SConst:
    value: float
    span: Span = _span()


@dataclass(frozen=True)
class SVar:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class SFun:
    params: tuple
    body: object
    span: Span = _span()


@dataclass(frozen=True)
class SApp:
    fn: object
    arg: object
    span: Span = _span()


@dataclass(frozen=True)
class SIf:
    cond: object
    then: object
    else_: object
    span: Span = _span()


@dataclass(frozen=True)
class SPrim:
    op: str
    args: tuple
    span: Span = _span()


@dataclass(frozen=True)
class SSample:
    dist: Dist
    args: tuple
    span: Span = _span()


@dataclass(frozen=True)
class SWeight:
    arg: object
    span: Span = _span()


@dataclass(frozen=True)
class SLogWeight:
    arg: object
    span: Span = _span()


@dataclass(frozen=True)
class SResample:
    span: Span = _span()


@dataclass(frozen=True)
class SList:
    items: tuple
    span: Span = _span()


@dataclass(frozen=True)
class SRecord:
    fields: tuple
    span: Span = _span()


@dataclass(frozen=True)
class SProj:
    term: object
    field: str
    span: Span = _span()


@dataclass(frozen=True)
class SMatch:
    scrutinee: object
    cases: tuple
    span: Span = _span()


@dataclass(frozen=True)
class SLet:
    name: str
    params: tuple
    value: object
    body: object
    span: Span = _span()


@dataclass(frozen=True)
class SLetRec:
    name: str
    params: tuple
    value: object
    body: object
    span: Span = _span()


@dataclass(frozen=True)
class SSeq:
    first: object
    second: object
    span: Span = _span()


SURFACE_TYPES = (SConst, SVar, SFun, SApp, SIf, SPrim, SSample, SWeight, SLogWeight,
                 SResample, SList, SRecord, SProj, SMatch, SLet, SLetRec, SSeq)
